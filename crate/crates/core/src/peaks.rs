//! Local-maximum detection with height, prominence and spacing filters.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakFilter {
    /// Minimum spacing between kept peaks, in samples.
    pub min_distance: usize,
    /// Absolute height a peak must reach.
    pub min_height: Option<f64>,
    /// Absolute prominence a peak must reach.
    pub min_prominence: Option<f64>,
}

/// Indices of local maxima. A flat top counts once, at its middle sample;
/// edge samples never count.
pub fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                out.push((i + j) / 2);
                i = j + 1;
                continue;
            }
            i = j;
        }
        i += 1;
    }
    out
}

/// Height of `x[peak]` above the higher of the two lowest points reached
/// before climbing to a strictly higher sample on either side.
pub fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Sorted peak indices passing `filter`. Conflicts under the spacing rule are
/// settled greedily, tallest first (earlier index on equal height).
pub fn find_peaks(x: &[f64], filter: &PeakFilter) -> Vec<usize> {
    let mut cands: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&i| filter.min_height.is_none_or(|h| x[i] >= h))
        .filter(|&i| filter.min_prominence.is_none_or(|p| prominence(x, i) >= p))
        .collect();
    cands.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::with_capacity(cands.len());
    for i in cands {
        if kept.iter().all(|&k| i.abs_diff(k) >= filter.min_distance) {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_counts_once() {
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 1.0, 0.0]), vec![2]);
        assert_eq!(local_maxima(&[0.0, 1.0, 1.0, 2.0, 0.0]), vec![3]);
        assert!(local_maxima(&[1.0, 1.0, 1.0]).is_empty());
        assert!(local_maxima(&[3.0, 2.0, 1.0]).is_empty());
    }

    #[test]
    fn prominence_uses_higher_saddle() {
        let x = [0.0, 5.0, 1.0, 3.0, 2.0, 4.0, 0.0];
        assert_eq!(prominence(&x, 1), 5.0);
        assert_eq!(prominence(&x, 3), 1.0);
        assert_eq!(prominence(&x, 5), 3.0);
    }

    #[test]
    fn greedy_spacing_keeps_tallest() {
        let x = [0.0, 2.0, 0.0, 3.0, 0.0, 1.0, 0.0];
        let f = PeakFilter {
            min_distance: 3,
            min_height: None,
            min_prominence: None,
        };
        assert_eq!(find_peaks(&x, &f), vec![3]);
        let f = PeakFilter { min_distance: 2, ..f };
        assert_eq!(find_peaks(&x, &f), vec![1, 3, 5]);
    }
}
