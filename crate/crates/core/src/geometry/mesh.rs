use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use super::field::DensityField;
use crate::error::{GicError, Result};
use crate::Vec3;

/// Indexed triangle mesh with counter-clockwise outward faces.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Number of edges not shared by exactly two triangles.
    pub fn boundary_edge_count(&self) -> usize {
        let mut count: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        count.values().filter(|&&c| c != 2).count()
    }

    pub fn write_obj(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# {} vertices, {} triangles", self.vertices.len(), self.triangles.len())?;
        for v in &self.vertices {
            writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for t in &self.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    pub fn save_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| GicError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_obj(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| GicError::io(path, e))
    }
}

const CORNER_OFFSETS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

// Corners of each face in cyclic order.
const FACES: [[usize; 4]; 6] = [
    [0, 2, 6, 4], // x = 0
    [1, 3, 7, 5], // x = 1
    [0, 1, 5, 4], // y = 0
    [2, 3, 7, 6], // y = 1
    [0, 1, 3, 2], // z = 0
    [4, 5, 7, 6], // z = 1
];

fn edges() -> &'static [(usize, usize); 12] {
    static EDGES: OnceLock<[(usize, usize); 12]> = OnceLock::new();
    EDGES.get_or_init(|| {
        let mut out = [(0, 0); 12];
        let mut n = 0;
        for a in 0..8 {
            for axis in 0..3 {
                if a & (1 << axis) == 0 {
                    out[n] = (a, a | (1 << axis));
                    n += 1;
                }
            }
        }
        out
    })
}

fn edge_id(a: usize, b: usize) -> usize {
    let key = (a.min(b), a.max(b));
    edges().iter().position(|&e| e == key).expect("cube edge")
}

/// Closed loops of crossed edges for every inside/outside corner pattern,
/// oriented so that the fan normal points from inside to outside. Faces
/// with two diagonal inside corners keep the inside corners separated,
/// which every neighbouring cube resolves identically.
fn loop_table() -> &'static Vec<Vec<Vec<usize>>> {
    static TABLE: OnceLock<Vec<Vec<Vec<usize>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(loops_for_case).collect())
}

fn loops_for_case(case: usize) -> Vec<Vec<usize>> {
    let inside = |c: usize| case & (1 << c) != 0;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); 12];
    for face in FACES {
        // crossings in cyclic order: (edge, entering-the-inside?)
        let crossings: Vec<(usize, bool)> = (0..4)
            .filter_map(|k| {
                let (a, b) = (face[k], face[(k + 1) % 4]);
                (inside(a) != inside(b)).then(|| (edge_id(a, b), inside(b)))
            })
            .collect();
        for (n, &(e, entering)) in crossings.iter().enumerate() {
            if entering {
                let (exit, _) = crossings[(n + 1) % crossings.len()];
                adjacency[e].push(exit);
                adjacency[exit].push(e);
            }
        }
    }

    let mut visited = [false; 12];
    let mut loops = Vec::new();
    for start in 0..12 {
        if visited[start] || adjacency[start].is_empty() {
            continue;
        }
        let mut cycle = vec![start];
        visited[start] = true;
        let (mut prev, mut cur) = (start, adjacency[start][0]);
        while cur != start {
            visited[cur] = true;
            cycle.push(cur);
            let next = if adjacency[cur][0] != prev {
                adjacency[cur][0]
            } else {
                adjacency[cur][1]
            };
            prev = cur;
            cur = next;
        }
        orient(&mut cycle, &inside);
        loops.push(cycle);
    }
    loops
}

fn orient(cycle: &mut [usize], inside: &impl Fn(usize) -> bool) {
    let corner = |c: usize| {
        let o = CORNER_OFFSETS[c];
        Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
    };
    let mid = |e: usize| {
        let (a, b) = edges()[e];
        (corner(a) + corner(b)) * 0.5
    };
    let mut normal = Vec3::zeros();
    for n in 1..cycle.len() - 1 {
        let (a, b, c) = (mid(cycle[0]), mid(cycle[n]), mid(cycle[n + 1]));
        normal += (b - a).cross(&(c - a));
    }
    let mut outward = Vec3::zeros();
    for &e in cycle.iter() {
        let (a, b) = edges()[e];
        let (inner, outer) = if inside(a) { (a, b) } else { (b, a) };
        outward += corner(outer) - corner(inner);
    }
    if normal.dot(&outward) < 0.0 {
        cycle.reverse();
    }
}

/// Extracts the `iso` level set of the voxel-center samples with marching
/// cubes. Samples outside the grid count as zero so the surface closes at
/// the borders. Returns an empty mesh when nothing crosses `iso`.
pub fn export_mesh(field: &DensityField, iso: f64) -> Result<TriangleMesh> {
    field.validate()?;
    if !(iso > 0.0 && iso < 1.0) {
        return Err(GicError::invalid(format!("iso level must lie in (0, 1), got {iso}")));
    }
    let [nx, ny, nz] = field.dims;
    // padded sample lattice: index p maps to voxel p - 1
    let sample = |p: [usize; 3]| -> f64 {
        if p[0] == 0 || p[1] == 0 || p[2] == 0 || p[0] > nx || p[1] > ny || p[2] > nz {
            0.0
        } else {
            field.get(p[0] - 1, p[1] - 1, p[2] - 1) as f64
        }
    };
    let position = |p: [usize; 3]| {
        field.origin
            + Vec3::new(p[0] as f64 - 0.5, p[1] as f64 - 0.5, p[2] as f64 - 0.5) * field.cell_size
    };

    let mut mesh = TriangleMesh::default();
    let mut vertex_of_edge: HashMap<([usize; 3], usize), u32> = HashMap::new();
    let table = loop_table();

    for i in 0..=nx {
        for j in 0..=ny {
            for k in 0..=nz {
                let corners: [[usize; 3]; 8] =
                    CORNER_OFFSETS.map(|o| [i + o[0], j + o[1], k + o[2]]);
                let values = corners.map(sample);
                let case = values
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (c, &v)| if v >= iso { acc | (1 << c) } else { acc });
                if case == 0 || case == 255 {
                    continue;
                }
                for cycle in &table[case] {
                    let ids: Vec<u32> = cycle
                        .iter()
                        .map(|&e| {
                            let (a, b) = edges()[e];
                            let key = (corners[a], b ^ a);
                            *vertex_of_edge.entry(key).or_insert_with(|| {
                                let t = (iso - values[a]) / (values[b] - values[a]);
                                let p = position(corners[a])
                                    + (position(corners[b]) - position(corners[a])) * t;
                                mesh.vertices.push(p);
                                (mesh.vertices.len() - 1) as u32
                            })
                        })
                        .collect();
                    for n in 1..ids.len() - 1 {
                        mesh.triangles.push([ids[0], ids[n], ids[n + 1]]);
                    }
                }
            }
        }
    }
    Ok(mesh)
}
