/// Slack added to `eps` when testing lattice distances, so that four-decimal
/// approximations of shell radii such as 1.4142 and 1.7320 include the
/// shell.
pub const EPS_SLACK: f64 = 1e-4;

/// Nonzero lattice offsets within `eps`, in ascending lexicographic order
/// (which is ascending linear-offset order on any grid the offset fits in).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stencil {
    offsets: Vec<[i32; 3]>,
}

impl Stencil {
    pub fn offsets(&self) -> &[[i32; 3]] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// The stencil plus the origin, still in lexicographic order.
    pub fn closed(&self) -> Vec<[i32; 3]> {
        let mut all = self.offsets.clone();
        let at = all.partition_point(|v| *v < [0, 0, 0]);
        all.insert(at, [0, 0, 0]);
        all
    }

    /// Offsets strictly after the origin; each undirected neighbor pair is
    /// visited once when walking these.
    pub fn forward(&self) -> &[[i32; 3]] {
        let at = self.offsets.partition_point(|v| *v < [0, 0, 0]);
        &self.offsets[at..]
    }
}

pub fn build_stencil(eps: f64) -> Stencil {
    let reach = (eps + EPS_SLACK).floor().max(0.0) as i32;
    let limit = (eps + EPS_SLACK) * (eps + EPS_SLACK);
    let mut offsets = Vec::new();
    for d1 in -reach..=reach {
        for d2 in -reach..=reach {
            for d3 in -reach..=reach {
                let norm2 = (d1 * d1 + d2 * d2 + d3 * d3) as f64;
                if norm2 > 0.0 && norm2 <= limit {
                    offsets.push([d1, d2, d3]);
                }
            }
        }
    }
    Stencil { offsets }
}
