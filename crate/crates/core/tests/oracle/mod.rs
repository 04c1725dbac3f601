//! Brute-force reference implementations. Deliberately naive: explicit loops,
//! O(n²) rank counting and two-pass statistics, sharing no code with the
//! library.
#![allow(dead_code, clippy::needless_range_loop)]

/// Population variance, two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut sum = 0.0;
    for x in xs {
        sum += x;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for x in xs {
        ss += (x - mean) * (x - mean);
    }
    ss / n
}

/// `(u_v, u_a, mu_v)` from raw rows `q[t][j]`.
pub fn kinematics(q: &[Vec<f64>]) -> (f64, f64, f64) {
    let t_len = q.len();
    let joints = q[0].len();
    let mut u_v = f64::NEG_INFINITY;
    let mut u_a = f64::NEG_INFINITY;
    let mut abs_sum = 0.0;
    for j in 0..joints {
        let mut v = Vec::new();
        for t in 1..t_len {
            v.push(q[t][j] - q[t - 1][j]);
        }
        let mut a = Vec::new();
        for t in 1..v.len() {
            a.push(v[t] - v[t - 1]);
        }
        for x in &v {
            abs_sum += x.abs();
        }
        u_v = u_v.max(variance(&v));
        u_a = u_a.max(variance(&a));
    }
    (u_v, u_a, abs_sum / ((t_len - 1) * joints) as f64)
}

/// Ascending average ranks by counting: `#less + (#equal + 1) / 2`.
pub fn ranks_ascending(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Descending average ranks: best (largest) value gets rank 1.
pub fn ranks_descending(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let greater = xs.iter().filter(|&&y| y > x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            greater + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        dx += (x[i] - mx).powi(2);
        dy += (y[i] - my).powi(2);
    }
    num / (dx.sqrt() * dy.sqrt())
}

pub fn srcc(g: &[f64], p: &[f64]) -> f64 {
    pearson(&ranks_ascending(g), &ranks_ascending(p))
}

pub fn relative_l2(g: &[f64], p: &[f64]) -> f64 {
    let mut max = g[0];
    let mut min = g[0];
    for &x in g {
        if x > max {
            max = x;
        }
        if x < min {
            min = x;
        }
    }
    let mut s = 0.0;
    for i in 0..g.len() {
        s += ((g[i] - p[i]) / (max - min)).powi(2);
    }
    100.0 * s / g.len() as f64
}

/// Pairwise AUC in percent: every (positive, negative) pair, ties count 0.5.
pub fn auc(labels: &[bool], probs: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if probs[i] > probs[j] {
                    wins += 1.0;
                } else if probs[i] == probs[j] {
                    wins += 0.5;
                }
            }
        }
    }
    100.0 * wins / pairs
}

/// `(acc, f1)` in percent at threshold 0.5.
pub fn acc_f1(labels: &[bool], probs: &[f64]) -> (f64, f64) {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fneg = 0.0;
    let mut correct = 0.0;
    for i in 0..labels.len() {
        let pred = probs[i] >= 0.5;
        if pred == labels[i] {
            correct += 1.0;
        }
        if pred && labels[i] {
            tp += 1.0;
        }
        if pred && !labels[i] {
            fp += 1.0;
        }
        if !pred && labels[i] {
            fneg += 1.0;
        }
    }
    let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fneg) };
    (100.0 * correct / labels.len() as f64, 100.0 * f1)
}

/// `(R − mean) / (std + eps)` with population std, written out by hand.
pub fn advantages(r: &[f64], eps: f64) -> Vec<f64> {
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let std = variance(r).sqrt();
    r.iter()
        .map(|x| if std == 0.0 { 0.0 } else { (x - mean) / (std + eps) })
        .collect()
}

pub fn raw_score(values: &[f64; 4], weights: &[f64; 4], lc: f64, lf: f64, collision: bool, failure: bool) -> f64 {
    let mut s = [0.0; 4];
    for i in 0..4 {
        s[i] = values[i];
        if collision {
            s[i] /= lc;
        }
        if failure {
            s[i] /= lf;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..4 {
        num += weights[i] * s[i];
        den += weights[i];
    }
    num / den
}

pub fn rank_loss(human: &[usize], raw: &[f64]) -> f64 {
    let r = ranks_descending(raw);
    let mut s = 0.0;
    for i in 0..human.len() {
        s += (human[i] as f64 - r[i]).abs();
    }
    s / human.len() as f64
}
