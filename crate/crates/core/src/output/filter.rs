//! Column decimation for plotting. The time axis is cut into `r` columns;
//! each column keeps its first point, its lowest and highest values (first
//! occurrence) and its last point, so at most `4r` points survive and no
//! spike disappears.

#[derive(Clone, Copy, Debug)]
struct Column {
    first: (usize, (f64, f64)),
    min: (usize, (f64, f64)),
    max: (usize, (f64, f64)),
    last: (usize, (f64, f64)),
}

impl Column {
    fn new(i: usize, p: (f64, f64)) -> Self {
        Column {
            first: (i, p),
            min: (i, p),
            max: (i, p),
            last: (i, p),
        }
    }

    fn push(&mut self, i: usize, p: (f64, f64)) {
        if p.1 < self.min.1 .1 {
            self.min = (i, p);
        }
        if p.1 > self.max.1 .1 {
            self.max = (i, p);
        }
        self.last = (i, p);
    }

    /// `self` followed by `other`.
    fn merge(self, other: Column) -> Column {
        Column {
            first: self.first,
            min: if other.min.1 .1 < self.min.1 .1 {
                other.min
            } else {
                self.min
            },
            max: if other.max.1 .1 > self.max.1 .1 {
                other.max
            } else {
                self.max
            },
            last: other.last,
        }
    }

    fn emit(&self, out: &mut Vec<(usize, (f64, f64))>) {
        let mut v = [self.first, self.min, self.max, self.last];
        v.sort_by_key(|x| x.0);
        for (k, x) in v.iter().enumerate() {
            if k == 0 || x.0 != v[k - 1].0 {
                out.push(*x);
            }
        }
    }
}

/// Decimate a time-ordered series to at most `4 * r` points.
pub fn filter_trajectory(points: &[(f64, f64)], r: usize) -> Vec<(f64, f64)> {
    let r = r.max(1);
    let Some(&(t0, _)) = points.first() else {
        return Vec::new();
    };
    let t1 = points.last().unwrap().0;
    let width = (t1 - t0) / r as f64;
    let col = |t: f64| -> usize {
        if width > 0.0 {
            (((t - t0) / width) as usize).min(r - 1)
        } else {
            0
        }
    };
    let mut out = Vec::new();
    let mut cur: Option<(usize, Column)> = None;
    for (i, &p) in points.iter().enumerate() {
        let c = col(p.0);
        match &mut cur {
            Some((cc, column)) if *cc == c => column.push(i, p),
            _ => {
                if let Some((_, column)) = cur.take() {
                    column.emit(&mut out);
                }
                cur = Some((c, Column::new(i, p)));
            }
        }
    }
    if let Some((_, column)) = cur {
        column.emit(&mut out);
    }
    out.into_iter().map(|(_, p)| p).collect()
}

/// Streaming variant with memory bounded by `r` columns. When a point lands
/// beyond the last column, columns are merged pairwise and their width
/// doubles.
#[derive(Clone, Debug)]
pub struct StreamFilter {
    r: usize,
    t0: Option<f64>,
    horizon: Option<f64>,
    width: Option<f64>,
    columns: Vec<Option<Column>>,
    seen: usize,
}

impl StreamFilter {
    /// `horizon`, when known, sets the initial column width.
    pub fn new(r: usize, horizon: Option<f64>) -> Self {
        let r = r.max(1);
        StreamFilter {
            r,
            t0: None,
            horizon: horizon.filter(|h| h.is_finite()),
            width: None,
            columns: vec![None; r],
            seen: 0,
        }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        let i = self.seen;
        self.seen += 1;
        let t0 = *self.t0.get_or_insert(t);
        if self.width.is_none() {
            self.width = match self.horizon {
                Some(h) if h > t0 => Some((h - t0) / self.r as f64),
                _ if t > t0 => Some((t - t0) * 2.0 / self.r as f64),
                _ => None,
            };
        }
        let mut c = self.column(t0, t);
        while c >= self.r {
            self.coarsen();
            c = self.column(t0, t);
        }
        match &mut self.columns[c] {
            Some(col) => col.push(i, (t, v)),
            slot => *slot = Some(Column::new(i, (t, v))),
        }
    }

    fn column(&self, t0: f64, t: f64) -> usize {
        let Some(w) = self.width else { return 0 };
        let c = ((t - t0) / w) as usize;
        // The right edge of the last column belongs to it.
        if c == self.r && t - t0 <= w * self.r as f64 {
            self.r - 1
        } else {
            c
        }
    }

    fn coarsen(&mut self) {
        let mut merged = vec![None; self.r];
        for (k, slot) in merged.iter_mut().enumerate() {
            let a = self.columns.get(2 * k).copied().flatten();
            let b = self.columns.get(2 * k + 1).copied().flatten();
            *slot = match (a, b) {
                (Some(a), Some(b)) => Some(a.merge(b)),
                (a, b) => a.or(b),
            };
        }
        self.columns = merged;
        self.width = self.width.map(|w| w * 2.0);
    }

    pub fn finish(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for c in self.columns.iter().flatten() {
            c.emit(&mut out);
        }
        out.into_iter().map(|(_, p)| p).collect()
    }
}
