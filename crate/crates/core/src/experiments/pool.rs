use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

/// Number of workers to use when the caller passes 0.
pub fn default_jobs() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

/// Applies `f` to `0..count` on up to `jobs` scoped threads and returns the
/// results in index order. Work is handed out one index at a time, so the
/// output does not depend on the number of workers.
pub fn par_map<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = if jobs == 0 { default_jobs() } else { jobs }.min(count.max(1));
    if jobs <= 1 {
        return (0..count).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..count).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let v = f(i);
                slots.lock().expect("result slots")[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|v| v.expect("every index is processed"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let a = par_map(100, 4, |i| i * i);
        let b = par_map(100, 1, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
        assert!(par_map(0, 3, |i| i).is_empty());
    }
}
