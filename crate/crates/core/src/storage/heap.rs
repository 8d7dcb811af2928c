/// Binary max-heap ordered by a caller-supplied "runs before" predicate.
///
/// The predicate may read live shared state, so the heap property can drift
/// between calls; elements are never lost, only approximately ordered.
pub(crate) struct Heap<E> {
    items: Vec<E>,
}

impl<E> Heap<E> {
    pub(crate) fn new() -> Self {
        Heap { items: Vec::new() }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.items.len()
    }

    pub(crate) fn peek(&self) -> Option<&E> {
        self.items.first()
    }

    pub(crate) fn clear(&mut self) {
        self.items.clear();
    }

    pub(crate) fn push(&mut self, item: E, before: impl Fn(&E, &E) -> bool) {
        self.items.push(item);
        let mut child = self.items.len() - 1;
        while child > 0 {
            let parent = (child - 1) / 2;
            if !before(&self.items[child], &self.items[parent]) {
                break;
            }
            self.items.swap(child, parent);
            child = parent;
        }
    }

    pub(crate) fn pop(&mut self, before: impl Fn(&E, &E) -> bool) -> Option<E> {
        if self.items.is_empty() {
            return None;
        }
        let top = self.items.swap_remove(0);
        let len = self.items.len();
        let mut parent = 0;
        loop {
            let left = 2 * parent + 1;
            if left >= len {
                break;
            }
            let right = left + 1;
            let mut best = left;
            if right < len && before(&self.items[right], &self.items[left]) {
                best = right;
            }
            if !before(&self.items[best], &self.items[parent]) {
                break;
            }
            self.items.swap(best, parent);
            parent = best;
        }
        Some(top)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pops_in_sorted_order(values in proptest::collection::vec(any::<i32>(), 0..200)) {
            let mut heap = Heap::new();
            for &v in &values {
                heap.push(v, |a, b| a > b);
            }
            prop_assert_eq!(heap.len(), values.len());
            let mut out = Vec::new();
            while let Some(v) = heap.pop(|a, b| a > b) {
                out.push(v);
            }
            let mut expected = values.clone();
            expected.sort_by(|a, b| b.cmp(a));
            prop_assert_eq!(out, expected);
        }
    }
}
