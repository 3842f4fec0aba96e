//! Incremental bucketed k-d tree with exact Euclidean radius queries.

const BUCKET: usize = 24;

#[derive(Clone, Debug)]
enum Node {
    Leaf(Vec<u32>),
    Split {
        axis: usize,
        value: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug)]
pub struct KdTree {
    dim: usize,
    pts: Vec<f64>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn new(dim: usize) -> Self {
        KdTree {
            dim,
            pts: Vec::new(),
            nodes: vec![Node::Leaf(Vec::new())],
        }
    }

    pub fn len(&self) -> usize {
        self.pts.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.pts[i * self.dim..(i + 1) * self.dim]
    }

    /// Inserts a point and returns its index.
    pub fn insert(&mut self, p: &[f64]) -> usize {
        debug_assert_eq!(p.len(), self.dim);
        let idx = self.len();
        self.pts.extend_from_slice(p);
        let mut node = 0usize;
        loop {
            match &mut self.nodes[node] {
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    node = if p[*axis] <= *value {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf(items) => {
                    items.push(idx as u32);
                    if items.len() > BUCKET {
                        self.split(node);
                    }
                    return idx;
                }
            }
        }
    }

    fn split(&mut self, node: usize) {
        let Node::Leaf(items) = &self.nodes[node] else {
            return;
        };
        let mut best_axis = 0;
        let mut best_spread = 0.0;
        for a in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in items {
                let v = self.pts[i as usize * self.dim + a];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_axis = a;
            }
        }
        if best_spread <= 0.0 {
            return;
        }
        let mut vals: Vec<f64> = items
            .iter()
            .map(|&i| self.pts[i as usize * self.dim + best_axis])
            .collect();
        vals.sort_by(f64::total_cmp);
        let mut value = vals[vals.len() / 2];
        if value >= vals[vals.len() - 1] {
            // keep the right side nonempty
            value = vals[..vals.len() - 1]
                .iter()
                .copied()
                .filter(|v| *v < vals[vals.len() - 1])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let (l, r): (Vec<u32>, Vec<u32>) = items
            .iter()
            .partition(|&&i| self.pts[i as usize * self.dim + best_axis] <= value);
        let left = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(l));
        self.nodes.push(Node::Leaf(r));
        self.nodes[node] = Node::Split {
            axis: best_axis,
            value,
            left,
            right: left + 1,
        };
    }

    /// Appends every point index within Euclidean distance `r` of `q`.
    pub fn radius(&self, q: &[f64], r: f64, out: &mut Vec<usize>) {
        if self.is_empty() || r < 0.0 {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0u32];
        while let Some(n) = stack.pop() {
            match &self.nodes[n as usize] {
                Node::Split {
                    axis,
                    value,
                    left,
                    right,
                } => {
                    let diff = q[*axis] - value;
                    if diff <= r {
                        stack.push(*left);
                    }
                    if diff > -r {
                        stack.push(*right);
                    }
                }
                Node::Leaf(items) => {
                    for &i in items {
                        let p = self.point(i as usize);
                        let mut s = 0.0;
                        for k in 0..self.dim {
                            let d = p[k] - q[k];
                            s += d * d;
                            if s > r2 {
                                break;
                            }
                        }
                        if s <= r2 {
                            out.push(i as usize);
                        }
                    }
                }
            }
        }
    }
}
