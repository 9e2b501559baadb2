// SPDX-License-Identifier: Apache-2.0
// Copyright The nslice Authors

//! Bounded simple-path routing over the WAN graph.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::infra::{InfrastructureMap, LinkId, PopId};
use crate::placement::ReservationMode;
use crate::window::TimeWindow;

pub const MAX_HOPS: usize = 4;

/// A path as a list of WAN link indices.
pub(crate) type Path = Vec<usize>;

pub(crate) struct WanGraph {
    pub ids: Vec<LinkId>,
    pub class: Vec<u8>,
    /// Residual bitrate per link, minimum over every requested window.
    pub residual: Vec<u64>,
    /// Per PoP index: (link index, other end PoP index).
    adj: Vec<Vec<(usize, usize)>>,
    cache: PathCache,
}

/// Simple paths between a PoP pair, computed on first use.
type PathCache = RefCell<BTreeMap<(usize, usize), Rc<Vec<Path>>>>;

impl WanGraph {
    pub fn build(map: &InfrastructureMap, pops: &[PopId], windows: &[TimeWindow], mode: ReservationMode) -> Self {
        let index: BTreeMap<&PopId, usize> = pops.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut adj = vec![Vec::new(); pops.len()];
        let mut ids = Vec::new();
        let mut class = Vec::new();
        let mut residual = Vec::new();
        for (li, link) in map.wan_links.iter().enumerate() {
            let (a, b) = (index[&link.endpoint_a], index[&link.endpoint_b]);
            adj[a].push((li, b));
            adj[b].push((li, a));
            ids.push(link.id.clone());
            class.push(link.reliability_class);
            residual.push(
                windows
                    .iter()
                    .map(|w| map.residual_bitrate(&link.id, w, mode).expect("link from this map"))
                    .min()
                    .unwrap_or(link.capacity_mbps),
            );
        }
        WanGraph { ids, class, residual, adj, cache: RefCell::new(BTreeMap::new()) }
    }

    /// Every simple path of at most [`MAX_HOPS`] links from `a` to `b`, shortest first,
    /// then by link indices.
    pub fn paths(&self, a: usize, b: usize) -> Rc<Vec<Path>> {
        let key = (a.min(b), a.max(b));
        if let Some(p) = self.cache.borrow().get(&key) {
            return p.clone();
        }
        let mut out = Vec::new();
        let mut visited = vec![false; self.adj.len()];
        let mut cur = Vec::new();
        self.dfs(key.0, key.1, &mut visited, &mut cur, &mut out);
        out.sort_by(|x: &Path, y: &Path| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
        let rc = Rc::new(out);
        self.cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    fn dfs(&self, at: usize, goal: usize, visited: &mut [bool], cur: &mut Path, out: &mut Vec<Path>) {
        if at == goal {
            out.push(cur.clone());
            return;
        }
        if cur.len() == MAX_HOPS {
            return;
        }
        visited[at] = true;
        for &(li, next) in &self.adj[at] {
            if !visited[next] {
                cur.push(li);
                self.dfs(next, goal, visited, cur, out);
                cur.pop();
            }
        }
        visited[at] = false;
    }

    pub fn min_class(&self, path: &Path) -> u8 {
        path.iter().map(|&l| self.class[l]).min().unwrap_or(u8::MAX)
    }
}

/// One inter-PoP traffic demand to be routed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RouteDemand {
    pub link: usize,
    pub a: usize,
    pub b: usize,
    pub bitrate: u64,
    pub class: u8,
}

/// Finds paths for every demand with shared link capacity respected. With `minimize`
/// the total bitrate × hops is minimized, otherwise the first routing found is returned.
/// Returns `None` when no routing exists.
pub(crate) fn route_all(g: &WanGraph, demands: &[RouteDemand], minimize: bool) -> Option<(Vec<Path>, u64)> {
    let options: Vec<Vec<Path>> = demands
        .iter()
        .map(|d| g.paths(d.a, d.b).iter().filter(|p| g.min_class(p) >= d.class).cloned().collect())
        .collect();
    if options.iter().any(Vec::is_empty) {
        return None;
    }
    // Cheapest conceivable cost of demands k.. ignoring capacity.
    let mut tail_lb = vec![0u64; demands.len() + 1];
    for k in (0..demands.len()).rev() {
        tail_lb[k] = tail_lb[k + 1] + demands[k].bitrate * options[k][0].len() as u64;
    }
    let mut residual = g.residual.clone();
    let mut chosen = Vec::with_capacity(demands.len());
    let mut best: Option<(Vec<Path>, u64)> = None;
    search(demands, &options, &tail_lb, 0, 0, &mut residual, &mut chosen, &mut best, minimize);
    best
}

#[allow(clippy::too_many_arguments)]
fn search(
    demands: &[RouteDemand],
    options: &[Vec<Path>],
    tail_lb: &[u64],
    k: usize,
    cost: u64,
    residual: &mut [u64],
    chosen: &mut Vec<Path>,
    best: &mut Option<(Vec<Path>, u64)>,
    minimize: bool,
) -> bool {
    if let Some((_, b)) = best {
        if !minimize || cost + tail_lb[k] >= *b {
            return !minimize;
        }
    }
    if k == demands.len() {
        *best = Some((chosen.clone(), cost));
        return !minimize;
    }
    let d = demands[k];
    for path in &options[k] {
        if path.iter().any(|&l| residual[l] < d.bitrate) {
            continue;
        }
        for &l in path {
            residual[l] -= d.bitrate;
        }
        chosen.push(path.clone());
        let done = search(
            demands,
            options,
            tail_lb,
            k + 1,
            cost + d.bitrate * path.len() as u64,
            residual,
            chosen,
            best,
            minimize,
        );
        chosen.pop();
        for &l in path {
            residual[l] += d.bitrate;
        }
        if done {
            return true;
        }
    }
    false
}
