//! Bounded reordering queue.
//!
//! Records arriving within the reordering window are released in timestamp
//! order; records older than anything already released are counted as
//! dropped, never silently reordered after emission. Release decisions use
//! record timestamps only (the newest timestamp seen is "logical now"), so
//! the queue behaves identically at any replay speed and never consults
//! the wall clock.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, PartialEq, Eq)]
pub struct QueueFull;

#[derive(Debug)]
struct Entry<T> {
    time: i64,
    seq: u64,
    item: T,
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<T> Eq for Entry<T> {}
impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

pub struct OrderedQueue<T> {
    window_ns: i64,
    capacity: usize,
    heap: BinaryHeap<Reverse<Entry<T>>>,
    seq: u64,
    /// Largest timestamp released so far.
    watermark: i64,
    /// Largest timestamp seen so far.
    logical_now: i64,
    dropped_late: u64,
}

impl<T> OrderedQueue<T> {
    pub fn new(window_ns: i64, capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        Self {
            window_ns,
            capacity,
            heap: BinaryHeap::new(),
            seq: 0,
            watermark: i64::MIN,
            logical_now: i64::MIN,
            dropped_late: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn dropped_late(&self) -> u64 {
        self.dropped_late
    }

    /// Inserts one item and returns everything the insertion released, in
    /// timestamp order. Items older than the release watermark are dropped
    /// and counted.
    pub fn push(&mut self, time: i64, item: T) -> Result<Vec<T>, QueueFull> {
        if time < self.watermark {
            self.dropped_late += 1;
            return Ok(Vec::new());
        }
        if self.heap.len() >= self.capacity {
            return Err(QueueFull);
        }
        self.heap.push(Reverse(Entry {
            time,
            seq: self.seq,
            item,
        }));
        self.seq += 1;
        self.logical_now = self.logical_now.max(time);
        Ok(self.release(self.logical_now.saturating_sub(self.window_ns)))
    }

    /// Releases everything still buffered, in timestamp order.
    pub fn flush(&mut self) -> Vec<T> {
        self.release(i64::MAX)
    }

    fn release(&mut self, up_to: i64) -> Vec<T> {
        let mut out = Vec::new();
        while let Some(Reverse(head)) = self.heap.peek() {
            if head.time > up_to {
                break;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked");
            self.watermark = self.watermark.max(entry.time);
            out.push(entry.item);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: i64 = 1_000_000;

    #[test]
    fn releases_in_timestamp_order() {
        let mut q: OrderedQueue<&str> = OrderedQueue::new(200 * MS, 16);
        assert_eq!(q.push(100 * MS, "b").unwrap(), Vec::<&str>::new());
        assert_eq!(q.push(50 * MS, "a").unwrap(), Vec::<&str>::new());
        // 400ms advances logical time past 100+200 and 50+200
        assert_eq!(q.push(400 * MS, "c").unwrap(), vec!["a", "b"]);
        assert_eq!(q.flush(), vec!["c"]);
    }

    #[test]
    fn late_arrivals_after_release_are_dropped() {
        let mut q: OrderedQueue<u32> = OrderedQueue::new(200 * MS, 16);
        q.push(0, 1).unwrap();
        q.push(500 * MS, 2).unwrap(); // releases t=0
        assert_eq!(q.dropped_late(), 0);
        let released = q.push(100 * MS, 3).unwrap(); // older than watermark... no, watermark is 0
        assert_eq!(released, vec![3]); // 100ms <= 500-200, released immediately
        let out = q.push(50 * MS, 4).unwrap(); // 50 < watermark 100 → dropped
        assert!(out.is_empty());
        assert_eq!(q.dropped_late(), 1);
    }

    #[test]
    fn equal_timestamps_keep_arrival_order() {
        let mut q: OrderedQueue<u32> = OrderedQueue::new(0, 16);
        let mut released = Vec::new();
        released.extend(q.push(10, 1).unwrap());
        released.extend(q.push(10, 2).unwrap());
        released.extend(q.push(10, 3).unwrap());
        released.extend(q.flush());
        assert_eq!(released, vec![1, 2, 3]);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut q: OrderedQueue<u32> = OrderedQueue::new(i64::MAX / 2, 2);
        q.push(1, 1).unwrap();
        q.push(2, 2).unwrap();
        assert_eq!(q.push(3, 3), Err(QueueFull));
        assert_eq!(q.flush(), vec![1, 2]);
        assert!(q.push(4, 4).is_ok());
    }

    #[test]
    fn zero_window_releases_up_to_newest() {
        let mut q: OrderedQueue<u32> = OrderedQueue::new(0, 16);
        assert_eq!(q.push(5, 1).unwrap(), vec![1]);
        assert_eq!(q.push(6, 2).unwrap(), vec![2]);
    }
}
