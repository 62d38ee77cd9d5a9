//! Seeded train/test partitioning under the stateful-batch divisibility rule:
//! every partition must hold a whole number of batches.

use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub stratified: bool,
}

/// Partition sizes for `fractions` of `total` (the last partition takes the
/// rest), each a positive multiple of `batch`.
fn partition_sizes(total: usize, fractions: &[f64], batch: usize) -> Result<Vec<usize>> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut sizes = Vec::with_capacity(fractions.len() + 1);
    for &f in fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in (0, 1), got {f}"
            )));
        }
        sizes.push((total as f64 * f).round() as usize);
    }
    let used: usize = sizes.iter().sum();
    if used >= total {
        return Err(Error::InvalidArgument(format!(
            "fractions {fractions:?} leave no samples for the last partition"
        )));
    }
    sizes.push(total - used);

    if sizes.iter().all(|&s| s >= batch && s % batch == 0) {
        return Ok(sizes);
    }
    Err(Error::Divisibility(divisibility_hint(
        total, fractions, batch, &sizes,
    )))
}

fn divisibility_hint(total: usize, fractions: &[f64], batch: usize, sizes: &[usize]) -> String {
    let mut msg = format!(
        "partition sizes {sizes:?} of {total} samples are not all positive multiples of batch size {batch}"
    );
    if !total.is_multiple_of(batch) {
        let below = (1..batch)
            .rev()
            .find(|b| total.is_multiple_of(*b))
            .unwrap_or(1);
        let above = (batch + 1..=total)
            .find(|b| total.is_multiple_of(*b))
            .unwrap_or(total);
        msg.push_str(&format!(
            "; {total} is not divisible by {batch}, nearest feasible batch sizes are {below} and {above}"
        ));
    } else if let Some(&f) = fractions.first() {
        let batches = total / batch;
        let k = (f * batches as f64).floor() as usize;
        let feasible: Vec<String> = [k, k + 1]
            .into_iter()
            .filter(|&k| k >= 1 && k < batches)
            .map(|k| format!("{:.6}", (k * batch) as f64 / total as f64))
            .collect();
        if !feasible.is_empty() {
            msg.push_str(&format!(
                "; nearest feasible fractions are {}",
                feasible.join(" and ")
            ));
        }
    }
    msg
}

/// Largest-remainder apportionment of `want` items over `available` pools,
/// proportional to pool size. Ties go to the lower index.
fn apportion(available: &[usize], want: usize) -> Vec<usize> {
    let total: usize = available.iter().sum();
    if total == 0 {
        return vec![0; available.len()];
    }
    let exact: Vec<f64> = available
        .iter()
        .map(|&a| a as f64 * want as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = exact
        .iter()
        .zip(available)
        .map(|(&e, &a)| (e.floor() as usize).min(a))
        .collect();
    let mut order: Vec<usize> = (0..available.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = want - alloc.iter().sum::<usize>();
    while remaining > 0 {
        let mut progressed = false;
        for &i in &order {
            if remaining == 0 {
                break;
            }
            if alloc[i] < available[i] {
                alloc[i] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    alloc
}

/// Splits into `fractions.len() + 1` partitions. Each partition's order is
/// shuffled so that class blocks are interleaved.
pub fn partition(
    ws: &WindowSet,
    fractions: &[f64],
    batch_size: usize,
    stratified: bool,
    rng: &mut Rng,
) -> Result<Vec<WindowSet>> {
    let sizes = partition_sizes(ws.len(), fractions, batch_size)?;
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];

    if stratified {
        let mut pools: Vec<Vec<usize>> = vec![Vec::new(); ws.num_classes()];
        for (i, &l) in ws.labels().iter().enumerate() {
            pools[l].push(i);
        }
        for pool in &mut pools {
            rng.shuffle(pool);
        }
        let mut cursor = vec![0; pools.len()];
        for (p, &size) in sizes.iter().enumerate() {
            let available: Vec<usize> = pools
                .iter()
                .zip(&cursor)
                .map(|(pl, &c)| pl.len() - c)
                .collect();
            let alloc = apportion(&available, size);
            for (c, &n) in alloc.iter().enumerate() {
                parts[p].extend_from_slice(&pools[c][cursor[c]..cursor[c] + n]);
                cursor[c] += n;
            }
        }
    } else {
        let mut all: Vec<usize> = (0..ws.len()).collect();
        rng.shuffle(&mut all);
        let mut start = 0;
        for (p, &size) in sizes.iter().enumerate() {
            parts[p] = all[start..start + size].to_vec();
            start += size;
        }
    }

    parts
        .iter_mut()
        .map(|idx| {
            rng.shuffle(idx);
            ws.select(idx)
        })
        .collect()
}

/// Two-way split into `(train, test)`.
pub fn split(ws: &WindowSet, spec: &SplitSpec) -> Result<(WindowSet, WindowSet)> {
    let mut rng = Rng::new(spec.seed);
    let mut parts = partition(
        ws,
        &[spec.train_fraction],
        spec.batch_size,
        spec.stratified,
        &mut rng,
    )?;
    let test = parts.pop().expect("two partitions");
    let train = parts.pop().expect("two partitions");
    Ok((train, test))
}

/// Three-way split into `(train, validation, test)`.
pub fn split_three(
    ws: &WindowSet,
    spec: &SplitSpec,
    validation_fraction: f64,
) -> Result<(WindowSet, WindowSet, WindowSet)> {
    let mut rng = Rng::new(spec.seed);
    let mut parts = partition(
        ws,
        &[spec.train_fraction, validation_fraction],
        spec.batch_size,
        spec.stratified,
        &mut rng,
    )?;
    let test = parts.pop().expect("three partitions");
    let val = parts.pop().expect("three partitions");
    let train = parts.pop().expect("three partitions");
    Ok((train, val, test))
}
