//! Cubical persistent homology of grayscale images.
//!
//! The superlevel filtration is run on the internal parameter
//! `t = 255 - intensity`, so a single sublevel engine serves both sweep
//! directions. Dimension 0 is computed with a union-find under the elder
//! rule, dimension 1 by reducing the square boundary columns over Z/2.
//! Bars are reported in intensity coordinates.

mod complex;
mod oracle;
mod reduction;
mod union_find;

use serde::{Deserialize, Serialize};

pub use complex::{build_sublevel_filtration, build_superlevel_filtration, CubicalComplex, Direction};
pub use oracle::brute_force_betti;

use crate::image_io::GrayImage;
use union_find::ElderForest;

/// One interval of the barcode, in intensity coordinates. `death == None`
/// marks an essential (infinite) class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PersistenceBar {
    pub dim: u8,
    pub birth: u8,
    pub death: Option<u8>,
}

impl PersistenceBar {
    pub fn is_infinite(&self) -> bool {
        self.death.is_none()
    }

    /// Finite bar as an interval of the increasing internal parameter.
    pub fn param_interval(&self, direction: Direction) -> Option<(u8, u8)> {
        self.death
            .map(|d| (direction.to_param(self.birth), direction.to_param(d)))
    }

    /// `|birth - death|` in intensity units; `None` for infinite bars.
    pub fn persistence(&self) -> Option<u8> {
        self.death.map(|d| self.birth.abs_diff(d))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Barcode {
    pub width: u32,
    pub height: u32,
    pub bars: Vec<PersistenceBar>,
    #[serde(skip)]
    pub direction: Direction,
}

impl Barcode {
    fn from_param_pairs(
        cx: &CubicalComplex,
        mut pairs: Vec<(u8, u8, Option<u8>)>,
    ) -> Self {
        // canonical order: dim, birth, death (infinite last), all in the
        // internal parameter
        pairs.sort_unstable_by_key(|&(dim, b, d)| (dim, b, d.map_or(256u16, u16::from)));
        let dir = cx.direction();
        let bars = pairs
            .into_iter()
            .map(|(dim, b, d)| PersistenceBar {
                dim,
                birth: dir.to_intensity(b),
                death: d.map(|d| dir.to_intensity(d)),
            })
            .collect();
        Self {
            width: cx.width(),
            height: cx.height(),
            bars,
            direction: dir,
        }
    }

    pub fn bars_in_dim(&self, dim: u8) -> impl Iterator<Item = &PersistenceBar> + '_ {
        self.bars.iter().filter(move |b| b.dim == dim)
    }

    /// Finite bars of one dimension as internal-parameter intervals.
    pub fn finite_intervals(&self, dim: u8) -> Vec<(u8, u8)> {
        self.bars_in_dim(dim)
            .filter_map(|b| b.param_interval(self.direction))
            .collect()
    }

    /// Reflects every intensity through `v -> 255 - v` and swaps the sweep
    /// direction. The superlevel barcode of an image reflects onto the
    /// sublevel barcode of its negative.
    pub fn reflect(&self) -> Self {
        let direction = match self.direction {
            Direction::Superlevel => Direction::Sublevel,
            Direction::Sublevel => Direction::Superlevel,
        };
        Self {
            width: self.width,
            height: self.height,
            bars: self
                .bars
                .iter()
                .map(|b| PersistenceBar {
                    dim: b.dim,
                    birth: 255 - b.birth,
                    death: b.death.map(|d| 255 - d),
                })
                .collect(),
            direction,
        }
    }

    /// Bars sorted without regard to the producing order, for multiset
    /// comparison.
    pub fn sorted_bars(&self) -> Vec<PersistenceBar> {
        let mut v = self.bars.clone();
        v.sort_unstable_by_key(|b| (b.dim, b.birth, b.death.map_or(-1, i16::from)));
        v
    }
}

/// Betti numbers `(b0, b1)` of the sublevel complex at intensity `cutoff`:
/// the number of bars alive there.
pub fn betti_at(bc: &Barcode, cutoff: u8) -> (usize, usize) {
    let c = bc.direction.to_param(cutoff);
    let mut betti = (0, 0);
    for bar in &bc.bars {
        let birth = bc.direction.to_param(bar.birth);
        let alive = birth <= c && bar.death.is_none_or(|d| bc.direction.to_param(d) > c);
        if alive {
            match bar.dim {
                0 => betti.0 += 1,
                _ => betti.1 += 1,
            }
        }
    }
    betti
}

/// Persistence of `cx`: union-find with the elder rule for dimension 0 and
/// column reduction of the squares for dimension 1. Zero-length bars are
/// dropped.
pub fn compute_persistence(cx: &CubicalComplex) -> Barcode {
    let mut pairs = h0_union_find(cx);
    pairs.extend(h1_pairs(cx, &reduction::reduce_squares(cx)));
    Barcode::from_param_pairs(cx, pairs)
}

/// Same barcode as [`compute_persistence`], but dimension 0 also comes from
/// matrix reduction (twist order with clearing). Slower; kept as an
/// independent route for cross-checking.
pub fn compute_persistence_by_reduction(cx: &CubicalComplex) -> Barcode {
    let squares = reduction::reduce_squares(cx);
    let edges = reduction::reduce_edges(cx, &squares.cleared);
    let vt = cx.vertex_values();
    let et = cx.edge_values();
    let mut pairs: Vec<(u8, u8, Option<u8>)> = edges
        .pairs
        .iter()
        .filter(|&&(v, e)| vt[v] != et[e])
        .map(|&(v, e)| (0, vt[v], Some(et[e])))
        .collect();
    pairs.extend(edges.essential.iter().map(|&v| (0, vt[v], None)));
    pairs.extend(h1_pairs(cx, &squares));
    Barcode::from_param_pairs(cx, pairs)
}

/// Superlevel barcode of an image.
pub fn barcode(img: &GrayImage) -> Barcode {
    compute_persistence(&build_superlevel_filtration(img))
}

/// Sublevel barcode of an image.
pub fn sublevel_barcode(img: &GrayImage) -> Barcode {
    compute_persistence(&build_sublevel_filtration(img))
}

fn h0_union_find(cx: &CubicalComplex) -> Vec<(u8, u8, Option<u8>)> {
    let vt = cx.vertex_values();
    let et = cx.edge_values();
    let mut order: Vec<u32> = (0..et.len() as u32).collect();
    order.sort_unstable_by_key(|&e| (et[e as usize], e));

    let key = |v: u32| (vt[v as usize], v);
    let mut forest = ElderForest::new(vt.len());
    let mut pairs = Vec::new();
    for e in order {
        let (a, b) = cx.edge_vertices(e as usize);
        let (ra, rb) = (forest.find(a as u32), forest.find(b as u32));
        if ra == rb {
            continue;
        }
        let (oa, ob) = (forest.oldest(ra), forest.oldest(rb));
        let (elder, younger) = if key(oa) < key(ob) { (oa, ob) } else { (ob, oa) };
        let (birth, death) = (vt[younger as usize], et[e as usize]);
        if birth != death {
            pairs.push((0, birth, Some(death)));
        }
        forest.union_roots(ra, rb, elder);
    }
    // Each remaining component contributes one essential class.
    let mut seen = vec![false; vt.len()];
    for v in 0..vt.len() as u32 {
        let r = forest.find(v) as usize;
        if !seen[r] {
            seen[r] = true;
            pairs.push((0, vt[forest.oldest(r as u32) as usize], None));
        }
    }
    pairs
}

fn h1_pairs(cx: &CubicalComplex, pass: &reduction::SquarePass) -> Vec<(u8, u8, Option<u8>)> {
    let et = cx.edge_values();
    let st = cx.square_values();
    pass.pairs
        .iter()
        .filter(|&&(e, s)| et[e] != st[s])
        .map(|&(e, s)| (1, et[e], Some(st[s])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bar(dim: u8, birth: u8, death: Option<u8>) -> PersistenceBar {
        PersistenceBar { dim, birth, death }
    }

    fn ring() -> GrayImage {
        GrayImage::from_fn(3, 3, |x, y| if x == 1 && y == 1 { 50 } else { 200 })
    }

    #[test]
    fn constant_image() {
        let bc = barcode(&GrayImage::filled(5, 5, 100));
        assert_eq!(bc.bars, vec![bar(0, 100, None)]);
    }

    #[test]
    fn ring_image() {
        let bc = barcode(&ring());
        assert_eq!(bc.bars, vec![bar(0, 200, None), bar(1, 200, Some(50))]);
    }

    #[test]
    fn two_blobs() {
        let img = GrayImage::new(5, 1, vec![10, 200, 10, 180, 10]).unwrap();
        let bc = barcode(&img);
        assert_eq!(bc.bars, vec![bar(0, 200, None), bar(0, 180, Some(10))]);
    }

    #[test]
    fn single_pixel() {
        let bc = barcode(&GrayImage::filled(1, 1, 7));
        assert_eq!(bc.bars, vec![bar(0, 7, None)]);
    }

    #[test]
    fn betti_examples() {
        let flat = barcode(&GrayImage::filled(5, 5, 100));
        assert_eq!(betti_at(&flat, 150), (0, 0));
        assert_eq!(betti_at(&flat, 100), (1, 0));
        assert_eq!(betti_at(&barcode(&ring()), 120), (1, 1));
        assert_eq!(betti_at(&barcode(&ring()), 50), (1, 0));
    }

    #[test]
    fn elder_rule_ties_keep_smaller_index() {
        // Two equal peaks: the left one (smaller index) survives; the
        // multiset is the same either way.
        let img = GrayImage::new(3, 1, vec![90, 20, 90]).unwrap();
        let bc = barcode(&img);
        assert_eq!(bc.bars, vec![bar(0, 90, Some(20)), bar(0, 90, None)]);
    }

    #[test]
    fn reduction_route_agrees() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 37 + y * 91 + x * y * 13) % 251) as u8);
        let cx = build_superlevel_filtration(&img);
        assert_eq!(compute_persistence(&cx), compute_persistence_by_reduction(&cx));
    }

    #[test]
    fn negation_duality() {
        let img = GrayImage::from_fn(8, 6, |x, y| ((x * 53 + y * 29 + x * y) % 256) as u8);
        let sup = barcode(&img);
        let sub = sublevel_barcode(&img.invert());
        assert_eq!(sup.reflect().sorted_bars(), sub.sorted_bars());
        assert_eq!(sub.direction, Direction::Sublevel);
    }

    #[test]
    fn json_uses_null_for_infinite_death() {
        let bc = barcode(&ring());
        let json = serde_json::to_string(&bc).unwrap();
        assert_eq!(
            json,
            r#"{"width":3,"height":3,"bars":[{"dim":0,"birth":200,"death":null},{"dim":1,"birth":200,"death":50}]}"#
        );
        let back: Barcode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bc);
    }

    fn image_strategy() -> impl Strategy<Value = GrayImage> {
        (1u32..=7, 1u32..=7).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop_oneof![Just(0u8), Just(90), Just(91), Just(200), any::<u8>()], (w * h) as usize)
                .prop_map(move |px| GrayImage::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn betti_counts_match_the_oracle(img in image_strategy()) {
            let bc = barcode(&img);
            for cutoff in 0..=255u8 {
                prop_assert_eq!(betti_at(&bc, cutoff), brute_force_betti(&img, cutoff), "cutoff {}", cutoff);
            }
        }

        #[test]
        fn one_essential_class_and_finite_loops(img in image_strategy()) {
            let bc = barcode(&img);
            prop_assert_eq!(bc.bars.iter().filter(|b| b.death.is_none()).count(), 1);
            prop_assert!(bc.bars_in_dim(1).all(|b| b.death.is_some()));
            prop_assert!(bc.bars.iter().all(|b| b.death.is_none_or(|d| b.birth > d)));
        }
    }
}
