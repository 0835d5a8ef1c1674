//! Occupancy grids, exact signed distance fields, homography/rotation
//! projection, and continuous SDF sampling for the map-aware reward.
//!
//! SDF convention: units are map cells, positive in free space (distance to
//! the nearest obstacle-cell center), negative inside obstacles (distance to
//! the nearest free-cell center). Grids with no obstacles (or no free cells)
//! get a finite cap of `2 * max(H, W)` so downstream rewards stay finite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;

/// Finite stand-in for "no obstacle anywhere" distances.
pub fn sdf_cap(h: usize, w: usize) -> f64 {
    2.0 * h.max(w) as f64
}

#[derive(Debug, Clone)]
pub struct SceneMap {
    /// Row-major `h x w`, nonzero = obstacle.
    pub occupancy: Vec<u8>,
    /// Row-major `h x w` signed distances in cell units.
    pub sdf: Vec<f64>,
    pub h: usize,
    pub w: usize,
    /// Map-to-world homography; its inverse takes world points to map
    /// coordinates `(col, row)`.
    pub homography: [[f64; 3]; 3],
    /// World-frame rotation applied before the homography inverse.
    pub rotation: [[f64; 2]; 2],
    /// World units per cell.
    pub cell_size: f64,
}

impl SceneMap {
    pub fn new(
        occupancy: Vec<u8>,
        h: usize,
        w: usize,
        homography: [[f64; 3]; 3],
        rotation: [[f64; 2]; 2],
        cell_size: f64,
    ) -> Result<Self> {
        if h == 0 || w == 0 || occupancy.len() != h * w {
            return Err(Error::Data(format!(
                "occupancy grid shape mismatch: {}x{} with {} cells",
                h,
                w,
                occupancy.len()
            )));
        }
        if !(cell_size > 0.0) {
            return Err(Error::Data("cell_size must be positive".into()));
        }
        if det3(&homography).abs() <= 1e-12 {
            return Err(Error::Numeric("homography is not invertible".into()));
        }
        if !rotation_is_orthonormal(&rotation, 1e-9) {
            return Err(Error::Numeric("rotation matrix is not orthonormal".into()));
        }
        let sdf = compute_sdf(&occupancy, h, w)?;
        Ok(Self { occupancy, sdf, h, w, homography, rotation, cell_size })
    }

    /// Axis-aligned world-to-grid map: cell (col, row) centers at
    /// `world = cell_size * (col, row) + origin`. Identity rotation.
    pub fn axis_aligned(
        occupancy: Vec<u8>,
        h: usize,
        w: usize,
        origin: Point,
        cell_size: f64,
    ) -> Result<Self> {
        let homography = [
            [cell_size, 0.0, origin[0]],
            [0.0, cell_size, origin[1]],
            [0.0, 0.0, 1.0],
        ];
        Self::new(occupancy, h, w, homography, [[1.0, 0.0], [0.0, 1.0]], cell_size)
    }

    pub fn sdf_at(&self, row: usize, col: usize) -> f64 {
        self.sdf[row * self.w + col]
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let d = det3(m);
    if d.abs() <= 1e-12 {
        return Err(Error::Numeric("singular 3x3 matrix".into()));
    }
    let c = |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    // Adjugate transpose over determinant.
    Ok([
        [c(1, 1, 2, 2) / d, -c(0, 1, 2, 2) / d, c(0, 1, 1, 2) / d],
        [-c(1, 0, 2, 2) / d, c(0, 0, 2, 2) / d, -c(0, 0, 1, 2) / d],
        [c(1, 0, 2, 1) / d, -c(0, 0, 2, 1) / d, c(0, 0, 1, 1) / d],
    ])
}

fn rotation_is_orthonormal(r: &[[f64; 2]; 2], tol: f64) -> bool {
    let c00 = r[0][0] * r[0][0] + r[1][0] * r[1][0];
    let c11 = r[0][1] * r[0][1] + r[1][1] * r[1][1];
    let c01 = r[0][0] * r[0][1] + r[1][0] * r[1][1];
    (c00 - 1.0).abs() <= tol && (c11 - 1.0).abs() <= tol && c01.abs() <= tol
}

/// Exact signed Euclidean distance field of a binary occupancy grid
/// (nonzero = obstacle), in cell units, via the two-pass lower-envelope
/// squared distance transform (per row, then per column).
pub fn compute_sdf(occupancy: &[u8], h: usize, w: usize) -> Result<Vec<f64>> {
    if h == 0 || w == 0 || occupancy.len() != h * w {
        return Err(Error::Data("empty or mis-shaped occupancy grid".into()));
    }
    let cap = sdf_cap(h, w);
    let any_obstacle = occupancy.iter().any(|&c| c != 0);
    let any_free = occupancy.iter().any(|&c| c == 0);
    if !any_obstacle {
        return Ok(vec![cap; h * w]);
    }
    if !any_free {
        return Ok(vec![-cap; h * w]);
    }
    let d_obst = edt_squared(occupancy, h, w, true);
    let d_free = edt_squared(occupancy, h, w, false);
    Ok((0..h * w)
        .map(|i| {
            if occupancy[i] != 0 {
                -d_free[i].sqrt()
            } else {
                d_obst[i].sqrt()
            }
        })
        .collect())
}

const EDT_INF: f64 = 1e20;

/// Squared Euclidean distance from every cell center to the nearest cell
/// where `(cell != 0) == to_obstacles`.
fn edt_squared(occupancy: &[u8], h: usize, w: usize, to_obstacles: bool) -> Vec<f64> {
    let mut grid: Vec<f64> = occupancy
        .iter()
        .map(|&c| if (c != 0) == to_obstacles { 0.0 } else { EDT_INF })
        .collect();

    let mut buf = vec![0.0; h.max(w)];
    // Rows.
    for r in 0..h {
        let row = &grid[r * w..(r + 1) * w];
        edt_1d(row, &mut buf[..w]);
        grid[r * w..(r + 1) * w].copy_from_slice(&buf[..w]);
    }
    // Columns.
    let mut col = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = grid[r * w + c];
        }
        edt_1d(&col, &mut buf[..h]);
        for r in 0..h {
            grid[r * w + c] = buf[r];
        }
    }
    grid
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n]; // parabola apex positions
    let mut z = vec![0.0f64; n + 1]; // envelope breakpoints
    let mut k = 0usize;
    z[0] = -EDT_INF;
    z[1] = EDT_INF;
    let intersect = |q: usize, p: usize| {
        (f[q] + (q * q) as f64 - f[p] - (p * p) as f64) / (2.0 * (q - p) as f64)
    };
    for q in 1..n {
        let mut s = intersect(q, v[k]);
        // With the finite EDT_INF sentinel, s stays above z[0] = -EDT_INF,
        // so k never underflows here.
        while s <= z[k] {
            k -= 1;
            s = intersect(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = EDT_INF;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        out[q] = dq * dq + f[p];
    }
}

/// Projects a world point into map coordinates `(col, row)`: applies the
/// rotation inverse, lifts to homogeneous coordinates, multiplies by the
/// homography inverse, and divides by the third coordinate.
pub fn project_world_to_map(point: Point, map: &SceneMap) -> Result<Point> {
    if !crate::geom::is_finite(point) {
        return Err(Error::Numeric("cannot project non-finite point".into()));
    }
    let r = &map.rotation;
    // Orthonormal, so the inverse is the transpose.
    let rx = r[0][0] * point[0] + r[1][0] * point[1];
    let ry = r[0][1] * point[0] + r[1][1] * point[1];
    let hinv = inv3(&map.homography)?;
    let u = hinv[0][0] * rx + hinv[0][1] * ry + hinv[0][2];
    let v = hinv[1][0] * rx + hinv[1][1] * ry + hinv[1][2];
    let z = hinv[2][0] * rx + hinv[2][1] * ry + hinv[2][2];
    if z.abs() < 1e-12 {
        return Err(Error::Numeric("projective degeneracy: homogeneous w near zero".into()));
    }
    Ok([u / z, v / z])
}

/// Applies the forward map (homography then rotation) to map coordinates;
/// the inverse of [`project_world_to_map`]. Used by round-trip oracles.
pub fn project_map_to_world(map_point: Point, map: &SceneMap) -> Result<Point> {
    let hm = &map.homography;
    let u = hm[0][0] * map_point[0] + hm[0][1] * map_point[1] + hm[0][2];
    let v = hm[1][0] * map_point[0] + hm[1][1] * map_point[1] + hm[1][2];
    let z = hm[2][0] * map_point[0] + hm[2][1] * map_point[1] + hm[2][2];
    if z.abs() < 1e-12 {
        return Err(Error::Numeric("projective degeneracy: homogeneous w near zero".into()));
    }
    let x = u / z;
    let y = v / z;
    let r = &map.rotation;
    Ok([r[0][0] * x + r[0][1] * y, r[1][0] * x + r[1][1] * y])
}

/// Bilinear interpolation of the SDF at fractional map coordinates
/// `(col, row)`; integer coordinates are cell centers. Points outside the
/// grid are clamped to the border value.
pub fn sample_sdf(map: &SceneMap, map_point: Point) -> f64 {
    let x = map_point[0].clamp(0.0, (map.w - 1) as f64);
    let y = map_point[1].clamp(0.0, (map.h - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(map.w - 1);
    let y1 = (y0 + 1).min(map.h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let v00 = map.sdf[y0 * map.w + x0];
    let v01 = map.sdf[y0 * map.w + x1];
    let v10 = map.sdf[y1 * map.w + x0];
    let v11 = map.sdf[y1 * map.w + x1];
    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
}

/// Sidecar metadata stored next to an occupancy PGM.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSidecar {
    /// Row-major 3x3 map-to-world homography.
    pub homography: [f64; 9],
    /// Row-major 2x2 rotation.
    pub rotation: [f64; 4],
    pub cell_size: f64,
}

/// Reads a P2 (ASCII) or P5 (binary) PGM; gray values >= 128 are obstacles.
pub fn load_occupancy_pgm(path: &Path) -> Result<(Vec<u8>, usize, usize)> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<(Vec<u8>, usize, usize), String> {
    let mut pos = 0usize;
    let mut token = || -> std::result::Result<String, String> {
        // Skip whitespace and `#` comments between header tokens.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("unexpected end of PGM header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token()?;
    if magic != "P2" && magic != "P5" {
        return Err(format!("unsupported PGM magic {magic:?}"));
    }
    let w: usize = token()?.parse().map_err(|_| "bad width")?;
    let h: usize = token()?.parse().map_err(|_| "bad height")?;
    let maxval: usize = token()?.parse().map_err(|_| "bad maxval")?;
    if w == 0 || h == 0 {
        return Err("zero-sized PGM".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    let threshold = 128usize;
    let mut occ = Vec::with_capacity(h * w);
    if magic == "P5" {
        pos += 1; // single whitespace byte after maxval
        if bytes.len() < pos + h * w {
            return Err("truncated P5 payload".into());
        }
        occ.extend(bytes[pos..pos + h * w].iter().map(|&b| u8::from(b as usize >= threshold)));
    } else {
        for _ in 0..h * w {
            let v: usize = token()?.parse().map_err(|_| "bad P2 sample")?;
            occ.push(u8::from(v >= threshold));
        }
    }
    Ok((occ, h, w))
}

/// Writes the occupancy grid as a binary P5 PGM (obstacle = 255, free = 0).
pub fn write_occupancy_pgm(path: &Path, occupancy: &[u8], h: usize, w: usize) -> Result<()> {
    if occupancy.len() != h * w {
        return Err(Error::Data("occupancy shape mismatch".into()));
    }
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(occupancy.iter().map(|&c| if c != 0 { 255u8 } else { 0u8 }));
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Loads a PGM occupancy grid plus its `<pgm>.json` sidecar into a SceneMap.
pub fn load_with_sidecar(pgm_path: &Path) -> Result<SceneMap> {
    let (occ, h, w) = load_occupancy_pgm(pgm_path)?;
    let sidecar_path = sidecar_path_for(pgm_path);
    let text = std::fs::read_to_string(&sidecar_path)
        .map_err(|e| Error::Data(format!("{}: {e}", sidecar_path.display())))?;
    let sc: MapSidecar = serde_json::from_str(&text)?;
    let hm = [
        [sc.homography[0], sc.homography[1], sc.homography[2]],
        [sc.homography[3], sc.homography[4], sc.homography[5]],
        [sc.homography[6], sc.homography[7], sc.homography[8]],
    ];
    let rot = [[sc.rotation[0], sc.rotation[1]], [sc.rotation[2], sc.rotation[3]]];
    SceneMap::new(occ, h, w, hm, rot, sc.cell_size)
}

pub fn sidecar_path_for(pgm_path: &Path) -> std::path::PathBuf {
    let mut s = pgm_path.as_os_str().to_owned();
    s.push(".json");
    std::path::PathBuf::from(s)
}

/// Saves the occupancy PGM and its sidecar next to each other.
pub fn save_with_sidecar(map: &SceneMap, pgm_path: &Path) -> Result<()> {
    write_occupancy_pgm(pgm_path, &map.occupancy, map.h, map.w)?;
    let hm = &map.homography;
    let sc = MapSidecar {
        homography: [
            hm[0][0], hm[0][1], hm[0][2], hm[1][0], hm[1][1], hm[1][2], hm[2][0], hm[2][1],
            hm[2][2],
        ],
        rotation: [map.rotation[0][0], map.rotation[0][1], map.rotation[1][0], map.rotation[1][1]],
        cell_size: map.cell_size,
    };
    std::fs::write(sidecar_path_for(pgm_path), serde_json::to_string_pretty(&sc)?)?;
    Ok(())
}

/// Brute-force nearest-cell scan; the oracle `compute_sdf` is tested against.
pub fn brute_force_sdf(occupancy: &[u8], h: usize, w: usize) -> Vec<f64> {
    let cap = sdf_cap(h, w);
    let obstacles: Vec<(usize, usize)> = (0..h * w)
        .filter(|&i| occupancy[i] != 0)
        .map(|i| (i / w, i % w))
        .collect();
    let free: Vec<(usize, usize)> =
        (0..h * w).filter(|&i| occupancy[i] == 0).map(|i| (i / w, i % w)).collect();
    (0..h * w)
        .map(|i| {
            let (r, c) = (i / w, i % w);
            let nearest = |set: &[(usize, usize)]| -> f64 {
                set.iter()
                    .map(|&(rr, cc)| {
                        let dr = rr as f64 - r as f64;
                        let dc = cc as f64 - c as f64;
                        (dr * dr + dc * dc).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            };
            if occupancy[i] != 0 {
                if free.is_empty() {
                    -cap
                } else {
                    -nearest(&free)
                }
            } else if obstacles.is_empty() {
                cap
            } else {
                nearest(&obstacles)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn identity_map(occ: Vec<u8>, h: usize, w: usize) -> SceneMap {
        SceneMap::axis_aligned(occ, h, w, [0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn sdf_single_center_obstacle() {
        let mut occ = vec![0u8; 9];
        occ[4] = 1; // center of a 3x3 grid
        let sdf = compute_sdf(&occ, 3, 3).unwrap();
        assert!((sdf[1] - 1.0).abs() < 1e-12); // edge-adjacent
        assert!((sdf[0] - 2f64.sqrt()).abs() < 1e-12); // corner
        assert!(sdf[4] < 0.0);
    }

    #[test]
    fn sdf_degenerate_grids() {
        let all_free = compute_sdf(&vec![0u8; 12], 3, 4).unwrap();
        assert!(all_free.iter().all(|&v| v == sdf_cap(3, 4)));
        let all_obst = compute_sdf(&vec![1u8; 12], 3, 4).unwrap();
        assert!(all_obst.iter().all(|&v| v <= 0.0));
        assert!(compute_sdf(&[], 0, 0).is_err());
    }

    #[test]
    fn sdf_matches_brute_force_on_random_grids() {
        for seed in 0..30u64 {
            let mut rng = crate::rng::stream(seed, "sdf-test");
            let h = rng.random_range(1..20usize);
            let w = rng.random_range(1..20usize);
            let occ: Vec<u8> = (0..h * w).map(|_| u8::from(rng.random::<f64>() < 0.2)).collect();
            let fast = compute_sdf(&occ, h, w).unwrap();
            let slow = brute_force_sdf(&occ, h, w);
            for i in 0..h * w {
                assert!(
                    (fast[i] - slow[i]).abs() < 1e-9,
                    "seed {seed} cell {i}: {} vs {}",
                    fast[i],
                    slow[i]
                );
            }
        }
    }

    #[test]
    fn sdf_sign_matches_occupancy() {
        let mut rng = crate::rng::stream(3, "sdf-sign");
        let occ: Vec<u8> = (0..64).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        let sdf = compute_sdf(&occ, 8, 8).unwrap();
        for i in 0..64 {
            if occ[i] != 0 {
                assert!(sdf[i] <= 0.0);
            } else {
                assert!(sdf[i] > 0.0);
            }
        }
    }

    #[test]
    fn projection_identity_and_scale() {
        let m = identity_map(vec![0u8; 16], 4, 4);
        let p = project_world_to_map([2.0, 3.0], &m).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12 && (p[1] - 3.0).abs() < 1e-12);

        // Pure scale diag(2, 2, 1): world (2, 3) lands at map (1, 1.5).
        let hm = [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]];
        let m2 = SceneMap::new(vec![0u8; 16], 4, 4, hm, [[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        let p2 = project_world_to_map([2.0, 3.0], &m2).unwrap();
        assert!((p2[0] - 1.0).abs() < 1e-12 && (p2[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn projection_rejects_degeneracy_and_bad_frames() {
        // Invertible homography whose inverse has w = 1 - x, degenerate at x = 1.
        let hm = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 1.0]];
        let m = SceneMap::new(vec![0u8; 16], 4, 4, hm, [[1.0, 0.0], [0.0, 1.0]], 1.0).unwrap();
        assert!(project_world_to_map([1.0, 0.5], &m).is_err());
        assert!(project_world_to_map([0.5, 0.5], &m).is_ok());

        let singular = [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(
            SceneMap::new(vec![0u8; 16], 4, 4, singular, [[1.0, 0.0], [0.0, 1.0]], 1.0).is_err()
        );
        let skew = [[1.0, 0.4], [0.0, 1.0]];
        let id3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(SceneMap::new(vec![0u8; 16], 4, 4, id3, skew, 1.0).is_err());
    }

    #[test]
    fn sample_sdf_interpolates() {
        let mut occ = vec![0u8; 16];
        occ[0] = 1;
        let m = identity_map(occ, 4, 4);
        // At a cell center the sample is that cell's value.
        assert_eq!(sample_sdf(&m, [2.0, 1.0]), m.sdf_at(1, 2));
        // Midpoint of two cells is the average of their values.
        let expect = 0.5 * (m.sdf_at(1, 1) + m.sdf_at(1, 2));
        assert!((sample_sdf(&m, [1.5, 1.0]) - expect).abs() < 1e-12);
        // Outside the grid clamps to the border value.
        assert_eq!(sample_sdf(&m, [-5.0, 1.0]), m.sdf_at(1, 0));
        assert_eq!(sample_sdf(&m, [100.0, 100.0]), m.sdf_at(3, 3));
    }

    #[test]
    fn pgm_roundtrip_and_p2() {
        let dir = std::env::temp_dir().join(format!("fg_pgm_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("grid.pgm");
        let occ = vec![0, 1, 0, 0, 1, 1];
        write_occupancy_pgm(&path, &occ, 2, 3).unwrap();
        let (back, h, w) = load_occupancy_pgm(&path).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(back, occ);

        let ascii = b"P2\n# comment\n3 2\n255\n0 200 0\n0 255 130\n";
        let p2 = dir.join("grid2.pgm");
        std::fs::write(&p2, ascii).unwrap();
        let (b2, h2, w2) = load_occupancy_pgm(&p2).unwrap();
        assert_eq!((h2, w2), (2, 3));
        assert_eq!(b2, vec![0, 1, 0, 0, 1, 1]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn sidecar_roundtrip() {
        let dir = std::env::temp_dir().join(format!("fg_sc_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("map.pgm");
        let mut occ = vec![0u8; 25];
        occ[12] = 1;
        let m = SceneMap::axis_aligned(occ, 5, 5, [-2.0, -2.0], 0.5).unwrap();
        save_with_sidecar(&m, &path).unwrap();
        let back = load_with_sidecar(&path).unwrap();
        assert_eq!(back.occupancy, m.occupancy);
        assert_eq!(back.sdf, m.sdf);
        assert_eq!(back.cell_size, m.cell_size);
        std::fs::remove_dir_all(&dir).ok();
    }

    proptest! {
        // Round-trip oracle: project into the map and back recovers the point.
        #[test]
        fn projection_roundtrip(seed in 0u64..200) {
            let mut rng = crate::rng::stream(seed, "proj");
            // Random invertible homography near an affine map, plus rotation.
            let theta: f64 = rng.random_range(-3.0..3.0);
            let rot = [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
            let hm = [
                [1.0 + rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-2.0..2.0)],
                [rng.random_range(-0.3..0.3), 1.0 + rng.random_range(-0.3..0.3), rng.random_range(-2.0..2.0)],
                [rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), 1.0],
            ];
            prop_assume!(det3(&hm).abs() > 1e-6);
            let m = SceneMap::new(vec![0u8; 16], 4, 4, hm, rot, 1.0).unwrap();
            let p = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let map_pt = project_world_to_map(p, &m).unwrap();
            let back = project_map_to_world(map_pt, &m).unwrap();
            prop_assert!((back[0] - p[0]).abs() < 1e-9 && (back[1] - p[1]).abs() < 1e-9);
        }

        // Bilinear oracle: explicit four-corner weighted sum.
        #[test]
        fn sample_sdf_matches_four_corner_formula(seed in 0u64..200) {
            let mut rng = crate::rng::stream(seed, "bilin");
            let occ: Vec<u8> = (0..36).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
            let m = identity_map(occ, 6, 6);
            let x: f64 = rng.random_range(0.0..5.0);
            let y: f64 = rng.random_range(0.0..5.0);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let val = (1.0 - fy) * ((1.0 - fx) * m.sdf_at(y0, x0) + fx * m.sdf_at(y0, x0 + 1))
                + fy * ((1.0 - fx) * m.sdf_at(y0 + 1, x0) + fx * m.sdf_at(y0 + 1, x0 + 1));
            prop_assert!((sample_sdf(&m, [x, y]) - val).abs() < 1e-12);
        }
    }
}
