use serde::{Deserialize, Serialize};

use crate::image_io::GrayImage;

/// Which way the intensity cutoff sweeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Pixels with intensity `>= c` as `c` decreases from 255.
    #[default]
    Superlevel,
    /// Pixels with intensity `<= c` as `c` increases from 0.
    Sublevel,
}

impl Direction {
    /// Maps an intensity onto the increasing internal parameter.
    #[inline]
    pub fn to_param(self, intensity: u8) -> u8 {
        match self {
            Direction::Superlevel => 255 - intensity,
            Direction::Sublevel => intensity,
        }
    }

    /// Inverse of [`Direction::to_param`].
    #[inline]
    pub fn to_intensity(self, param: u8) -> u8 {
        self.to_param(param)
    }
}

/// V-construction cubical complex of a pixel grid: one vertex per pixel,
/// edges between 4-adjacent pixels and one square per 2x2 block.
///
/// Every cell carries the internal filtration parameter
/// `t = max over its vertices of t(vertex)`, which under the superlevel
/// direction equals `255 - min intensity`.
///
/// Cell numbering: vertex `(x, y)` is `y * w + x`; horizontal edge from
/// `(x, y)` to `(x + 1, y)` is `y * (w - 1) + x`; vertical edge from `(x, y)`
/// to `(x, y + 1)` is `(w - 1) * h + y * w + x`; the square with lower-left
/// vertex `(x, y)` is `y * (w - 1) + x`. The linear cell index used for tie
/// breaking lists vertices, then edges, then squares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubicalComplex {
    width: u32,
    height: u32,
    direction: Direction,
    vertex_t: Vec<u8>,
    edge_t: Vec<u8>,
    square_t: Vec<u8>,
}

pub fn build_superlevel_filtration(img: &GrayImage) -> CubicalComplex {
    CubicalComplex::new(img, Direction::Superlevel)
}

pub fn build_sublevel_filtration(img: &GrayImage) -> CubicalComplex {
    CubicalComplex::new(img, Direction::Sublevel)
}

impl CubicalComplex {
    pub fn new(img: &GrayImage, direction: Direction) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let vertex_t: Vec<u8> = img.pixels().iter().map(|&v| direction.to_param(v)).collect();

        let mut edge_t = Vec::with_capacity((w - 1) * h + w * (h - 1));
        for y in 0..h {
            for x in 0..w - 1 {
                let v = y * w + x;
                edge_t.push(vertex_t[v].max(vertex_t[v + 1]));
            }
        }
        for y in 0..h - 1 {
            for x in 0..w {
                let v = y * w + x;
                edge_t.push(vertex_t[v].max(vertex_t[v + w]));
            }
        }

        let mut square_t = Vec::with_capacity((w - 1) * (h - 1));
        for y in 0..h - 1 {
            for x in 0..w - 1 {
                let v = y * w + x;
                square_t.push(
                    vertex_t[v]
                        .max(vertex_t[v + 1])
                        .max(vertex_t[v + w])
                        .max(vertex_t[v + w + 1]),
                );
            }
        }

        Self {
            width: w as u32,
            height: h as u32,
            direction,
            vertex_t,
            edge_t,
            square_t,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn vertex_values(&self) -> &[u8] {
        &self.vertex_t
    }

    pub fn edge_values(&self) -> &[u8] {
        &self.edge_t
    }

    pub fn square_values(&self) -> &[u8] {
        &self.square_t
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_t.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_t.len()
    }

    pub fn num_squares(&self) -> usize {
        self.square_t.len()
    }

    fn horizontal_edges(&self) -> usize {
        (self.width as usize - 1) * self.height as usize
    }

    /// Endpoints of edge `e` as vertex indices, lower index first.
    #[inline]
    pub fn edge_vertices(&self, e: usize) -> (usize, usize) {
        let w = self.width as usize;
        let nh = self.horizontal_edges();
        if e < nh {
            let (y, x) = (e / (w - 1), e % (w - 1));
            let v = y * w + x;
            (v, v + 1)
        } else {
            let v = e - nh;
            (v, v + w)
        }
    }

    /// The four boundary edges of square `s`: bottom, top, left, right.
    #[inline]
    pub fn square_edges(&self, s: usize) -> [usize; 4] {
        let w = self.width as usize;
        let nh = self.horizontal_edges();
        let (y, x) = (s / (w - 1), s % (w - 1));
        [
            y * (w - 1) + x,
            (y + 1) * (w - 1) + x,
            nh + y * w + x,
            nh + y * w + x + 1,
        ]
    }

    /// Checks `t(face) <= t(coface)` for every incidence.
    pub fn is_valid_filtration(&self) -> bool {
        let edges_ok = (0..self.num_edges()).all(|e| {
            let (a, b) = self.edge_vertices(e);
            self.vertex_t[a] <= self.edge_t[e] && self.vertex_t[b] <= self.edge_t[e]
        });
        let squares_ok = (0..self.num_squares()).all(|s| {
            self.square_edges(s)
                .iter()
                .all(|&e| self.edge_t[e] <= self.square_t[s])
        });
        edges_ok && squares_ok
    }
}
