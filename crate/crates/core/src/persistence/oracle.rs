use crate::image_io::GrayImage;

/// Betti numbers of the binary mask `{pixel >= cutoff}` computed directly:
/// components by union-find over 4-adjacency, `b1 = b0 - (V - E + F)`.
///
/// Shares nothing with the persistence engine; tests use it as an oracle.
pub fn brute_force_betti(img: &GrayImage, cutoff: u8) -> (usize, usize) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let on = |x: usize, y: usize| img.get(x as u32, y as u32) >= cutoff;

    let mut parent: Vec<usize> = (0..w * h).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    let (mut v, mut e, mut f) = (0i64, 0i64, 0i64);
    for y in 0..h {
        for x in 0..w {
            if !on(x, y) {
                continue;
            }
            v += 1;
            let here = y * w + x;
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h && on(nx, ny) {
                    e += 1;
                    let (a, b) = (root(&mut parent, here), root(&mut parent, ny * w + nx));
                    parent[a] = b;
                }
            }
            if x + 1 < w && y + 1 < h && on(x + 1, y) && on(x, y + 1) && on(x + 1, y + 1) {
                f += 1;
            }
        }
    }

    let mut b0 = 0i64;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if on(x, y) && root(&mut parent, i) == i {
                b0 += 1;
            }
        }
    }
    let b1 = b0 - (v - e + f);
    (b0 as usize, b1 as usize)
}
