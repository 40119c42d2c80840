//! Vector timestamps, epochs and the circular-window order.
//!
//! Clock components are stored in a [`ClockWord`], the narrowest integer the
//! detector needs: window indices (plus the `-1` sentinel) for windowed
//! detectors, local times for the baselines.

use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

use crate::trace::ThreadId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("vector timestamps have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("window index {index} is outside {{-1}} ∪ [0, {capacity})")]
    IndexOutOfRange { index: i64, capacity: usize },
    #[error("invalid window: head {head}, capacity {capacity}")]
    InvalidWindow { head: usize, capacity: usize },
}

/// Integer type of one clock component.
pub trait ClockWord: Copy + Ord + Eq + Hash + Debug + Default + Send + Sync + 'static {
    /// The value of an empty component.
    const BOTTOM: Self;
    const MAX: i64;
    fn from_i64(v: i64) -> Self;
    fn to_i64(self) -> i64;
}

macro_rules! signed_word {
    ($($t:ty),*) => {$(
        impl ClockWord for $t {
            const BOTTOM: Self = -1;
            const MAX: i64 = <$t>::MAX as i64;
            #[inline]
            fn from_i64(v: i64) -> Self {
                debug_assert!((-1..=<Self as ClockWord>::MAX).contains(&v), "clock value {v} does not fit");
                v as $t
            }
            #[inline]
            fn to_i64(self) -> i64 {
                self as i64
            }
        }
    )*};
}

signed_word!(i8, i16, i32, i64);

/// Counting clocks (number of events included, `0` for none).
impl ClockWord for u32 {
    const BOTTOM: Self = 0;
    const MAX: i64 = u32::MAX as i64;
    #[inline]
    fn from_i64(v: i64) -> Self {
        debug_assert!((0..=<Self as ClockWord>::MAX).contains(&v), "clock value {v} does not fit");
        v as u32
    }
    #[inline]
    fn to_i64(self) -> i64 {
        self as i64
    }
}

/// Width selected at detector construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockWidth {
    W8,
    W16,
    W32,
    W64,
}

impl ClockWidth {
    /// Smallest signed width that holds every value in `-1..=max_value`.
    pub fn for_max(max_value: u64) -> Self {
        if max_value <= i8::MAX as u64 {
            ClockWidth::W8
        } else if max_value <= i16::MAX as u64 {
            ClockWidth::W16
        } else if max_value <= i32::MAX as u64 {
            ClockWidth::W32
        } else {
            ClockWidth::W64
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            ClockWidth::W8 => 8,
            ClockWidth::W16 => 16,
            ClockWidth::W32 => 32,
            ClockWidth::W64 => 64,
        }
    }
}

/// A mapping from threads to clock values. Components past the end read as
/// [`ClockWord::BOTTOM`], so clocks can grow as threads appear in a stream.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct VectorTimestamp<C: ClockWord> {
    entries: Vec<C>,
}

impl<C: ClockWord> VectorTimestamp<C> {
    /// The all-bottom timestamp with `len` components.
    pub fn bottom(len: usize) -> Self {
        VectorTimestamp { entries: vec![C::BOTTOM; len] }
    }

    pub fn from_values(values: &[i64]) -> Self {
        VectorTimestamp { entries: values.iter().map(|&v| C::from_i64(v)).collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn get(&self, t: ThreadId) -> C {
        self.entries.get(t.index()).copied().unwrap_or(C::BOTTOM)
    }

    #[inline]
    pub fn set(&mut self, t: ThreadId, v: C) {
        let i = t.index();
        if i >= self.entries.len() {
            self.entries.resize(i + 1, C::BOTTOM);
        }
        self.entries[i] = v;
    }

    pub fn as_slice(&self) -> &[C] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (ThreadId, C)> + '_ {
        self.entries.iter().enumerate().map(|(i, &c)| (ThreadId(i as u32), c))
    }

    pub fn is_bottom(&self) -> bool {
        self.entries.iter().all(|&c| c == C::BOTTOM)
    }

    fn same_len(&self, other: &Self) -> Result<(), ClockError> {
        if self.len() == other.len() {
            Ok(())
        } else {
            Err(ClockError::LengthMismatch(self.len(), other.len()))
        }
    }

    /// Componentwise maximum.
    pub fn join(&self, other: &Self) -> Result<Self, ClockError> {
        self.same_len(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(&a, &b)| a.max(b)).collect();
        Ok(VectorTimestamp { entries })
    }

    /// Pointwise `<=`.
    pub fn leq(&self, other: &Self) -> Result<bool, ClockError> {
        self.same_len(other)?;
        Ok(self.leq_padded(other))
    }

    /// Pointwise `<=` under the window order of `ctx`.
    pub fn window_leq(&self, other: &Self, ctx: &WindowOrderCtx) -> Result<bool, ClockError> {
        self.same_len(other)?;
        for (&a, &b) in self.entries.iter().zip(&other.entries) {
            if !ctx.widx_leq(a.to_i64(), b.to_i64())? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// In-place join; the shorter side is padded with bottom.
    pub fn join_assign(&mut self, other: &Self) {
        if other.entries.len() > self.entries.len() {
            self.entries.resize(other.entries.len(), C::BOTTOM);
        }
        for (a, &b) in self.entries.iter_mut().zip(&other.entries) {
            if b > *a {
                *a = b;
            }
        }
    }

    /// `<=` with missing components read as bottom.
    pub fn leq_padded(&self, other: &Self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(i, &a)| a <= other.entries.get(i).copied().unwrap_or(C::BOTTOM))
    }
}

/// `t@c`: the clock value of one thread, used for last-write records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Epoch<C: ClockWord> {
    pub tid: ThreadId,
    pub clock: C,
}

impl<C: ClockWord> Epoch<C> {
    pub fn new(tid: ThreadId, clock: C) -> Self {
        Epoch { tid, clock }
    }
}

/// A null epoch precedes everything.
pub fn epoch_leq<C: ClockWord>(epoch: Option<Epoch<C>>, v: &VectorTimestamp<C>) -> bool {
    match epoch {
        None => true,
        Some(ep) => ep.clock <= v.get(ep.tid),
    }
}

/// Head position and capacity of a circular window. Live slots ordered from
/// oldest to newest are `head+1, …, capacity-1, 0, …, head`; `-1` is below
/// every slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowOrderCtx {
    head: usize,
    capacity: usize,
}

impl WindowOrderCtx {
    pub fn new(head: usize, capacity: usize) -> Result<Self, ClockError> {
        if capacity < 2 || head >= capacity {
            return Err(ClockError::InvalidWindow { head, capacity });
        }
        Ok(WindowOrderCtx { head, capacity })
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn check(&self, index: i64) -> Result<(), ClockError> {
        if index < -1 || index >= self.capacity as i64 {
            Err(ClockError::IndexOutOfRange { index, capacity: self.capacity })
        } else {
            Ok(())
        }
    }

    pub fn widx_leq(&self, a: i64, b: i64) -> Result<bool, ClockError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.leq_unchecked(a, b))
    }

    pub fn widx_lt(&self, a: i64, b: i64) -> Result<bool, ClockError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.lt_unchecked(a, b))
    }

    /// The comparator clauses: `a = -1`, `a <= b <= h`, `h < a <= b`, or
    /// `0 <= b <= h < a`.
    #[inline]
    pub fn leq_unchecked(&self, a: i64, b: i64) -> bool {
        let h = self.head as i64;
        a == -1 || (a <= b && b <= h) || (h < a && a <= b) || (b >= 0 && b <= h && h < a)
    }

    #[inline]
    pub fn lt_unchecked(&self, a: i64, b: i64) -> bool {
        a != b && !self.leq_unchecked(b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Position of a slot in the age sequence; -1 sorts first.
    fn age_rank(a: i64, h: usize, w: usize) -> i64 {
        if a == -1 {
            -1
        } else {
            ((a as usize + w - h - 1) % w) as i64
        }
    }

    fn vt(v: &[i64]) -> VectorTimestamp<i64> {
        VectorTimestamp::from_values(v)
    }

    #[test]
    fn join_examples() {
        let bot = VectorTimestamp::<i64>::bottom(2);
        assert_eq!(bot.join(&vt(&[3, 0])).unwrap(), vt(&[3, 0]));
        assert_eq!(vt(&[2, 5]).join(&vt(&[4, 1])).unwrap(), vt(&[4, 5]));
        assert_eq!(vt(&[1]).join(&vt(&[1, 2])), Err(ClockError::LengthMismatch(1, 2)));
    }

    #[test]
    fn leq_examples() {
        assert!(VectorTimestamp::<i64>::bottom(2).leq(&vt(&[0, 7])).unwrap());
        assert!(vt(&[1, 3]).leq(&vt(&[2, 3])).unwrap());
        assert!(!vt(&[2, 1]).leq(&vt(&[1, 2])).unwrap());
        assert!(vt(&[1]).leq(&vt(&[1, 2])).is_err());
    }

    #[test]
    fn epoch_examples() {
        let v = vt(&[3, 0]);
        assert!(epoch_leq::<i64>(None, &v));
        assert!(epoch_leq(Some(Epoch::new(ThreadId(0), 3)), &v));
        assert!(!epoch_leq(Some(Epoch::new(ThreadId(0), 4)), &v));
    }

    #[test]
    fn circular_window_comparison_example() {
        let ctx = WindowOrderCtx::new(2, 4).unwrap();
        assert!(ctx.widx_leq(3, 0).unwrap());
        assert!(!ctx.widx_leq(0, 3).unwrap());
        assert!(!ctx.widx_leq(1, 3).unwrap());
        assert!(ctx.widx_lt(3, 0).unwrap());
        for b in -1..4 {
            assert!(ctx.widx_leq(-1, b).unwrap());
        }
        assert!(ctx.widx_lt(-1, 0).unwrap());
        assert!(!ctx.widx_lt(2, 2).unwrap());
    }

    #[test]
    fn sentinel_is_strict_bottom() {
        // the unguarded fourth clause would make 3 <=_W -1 hold for h = 2
        let ctx = WindowOrderCtx::new(2, 4).unwrap();
        assert!(!ctx.widx_leq(3, -1).unwrap());
        assert!(!ctx.widx_leq(0, -1).unwrap());
    }

    #[test]
    fn out_of_range_indices() {
        let ctx = WindowOrderCtx::new(0, 4).unwrap();
        assert!(ctx.widx_leq(4, 0).is_err());
        assert!(ctx.widx_leq(0, -2).is_err());
        assert!(WindowOrderCtx::new(4, 4).is_err());
        assert!(WindowOrderCtx::new(0, 1).is_err());
    }

    #[test]
    fn comparator_agrees_with_age_order() {
        for w in 2..=8usize {
            for h in 0..w {
                let ctx = WindowOrderCtx::new(h, w).unwrap();
                for a in -1..w as i64 {
                    for b in -1..w as i64 {
                        let expect = age_rank(a, h, w) <= age_rank(b, h, w);
                        assert_eq!(ctx.widx_leq(a, b).unwrap(), expect, "w={w} h={h} a={a} b={b}");
                        assert_eq!(ctx.widx_lt(a, b).unwrap(), age_rank(a, h, w) < age_rank(b, h, w));
                    }
                }
            }
        }
    }

    #[test]
    fn window_leq_is_componentwise() {
        let ctx = WindowOrderCtx::new(2, 4).unwrap();
        // raw 3 > 0 but slot 3 is older than slot 0
        assert!(vt(&[3, -1]).window_leq(&vt(&[0, -1]), &ctx).unwrap());
        assert!(!vt(&[0, -1]).window_leq(&vt(&[3, -1]), &ctx).unwrap());
        assert!(VectorTimestamp::<i64>::bottom(3).window_leq(&vt(&[1, 2, 3]), &ctx).unwrap());
    }

    #[test]
    fn width_selection() {
        assert_eq!(ClockWidth::for_max(1), ClockWidth::W8);
        assert_eq!(ClockWidth::for_max(127), ClockWidth::W8);
        assert_eq!(ClockWidth::for_max(128), ClockWidth::W16);
        assert_eq!(ClockWidth::for_max(29_999), ClockWidth::W16);
        assert_eq!(ClockWidth::for_max(40_000), ClockWidth::W32);
        assert_eq!(ClockWidth::for_max(1 << 40), ClockWidth::W64);
    }

    fn small_vec(len: usize) -> impl Strategy<Value = Vec<i64>> {
        prop::collection::vec(-1i64..6, len)
    }

    proptest! {
        #[test]
        fn join_laws(a in small_vec(3), b in small_vec(3), c in small_vec(3)) {
            let (a, b, c) = (vt(&a), vt(&b), vt(&c));
            prop_assert_eq!(a.join(&a).unwrap(), a.clone());
            prop_assert_eq!(a.join(&b).unwrap(), b.join(&a).unwrap());
            prop_assert_eq!(a.join(&b).unwrap().join(&c).unwrap(), a.join(&b.join(&c).unwrap()).unwrap());
            let j = a.join(&b).unwrap();
            prop_assert!(a.leq(&j).unwrap() && b.leq(&j).unwrap());
            // least upper bound
            if a.leq(&c).unwrap() && b.leq(&c).unwrap() {
                prop_assert!(j.leq(&c).unwrap());
            }
        }

        #[test]
        fn window_leq_matches_component_oracle(h in 0usize..6, a in prop::collection::vec(-1i64..6, 4), b in prop::collection::vec(-1i64..6, 4)) {
            let ctx = WindowOrderCtx::new(h, 6).unwrap();
            let expect = a.iter().zip(&b).all(|(&x, &y)| age_rank(x, h, 6) <= age_rank(y, h, 6));
            prop_assert_eq!(vt(&a).window_leq(&vt(&b), &ctx).unwrap(), expect);
        }

        #[test]
        fn window_leq_preorder(h in 0usize..5, a in small_vec(3), b in small_vec(3), c in small_vec(3)) {
            let ctx = WindowOrderCtx::new(h, 6).unwrap();
            let (a, b, c) = (vt(&a), vt(&b), vt(&c));
            prop_assert!(a.window_leq(&a, &ctx).unwrap());
            if a.window_leq(&b, &ctx).unwrap() && b.window_leq(&c, &ctx).unwrap() {
                prop_assert!(a.window_leq(&c, &ctx).unwrap());
            }
        }

        #[test]
        fn epoch_matches_singleton_vector(t in 0u32..3, c in 0i64..6, v in small_vec(3)) {
            let v = vt(&v);
            let mut single = VectorTimestamp::<i64>::bottom(3);
            single.set(ThreadId(t), c);
            prop_assert_eq!(epoch_leq(Some(Epoch::new(ThreadId(t), c)), &v), single.leq(&v).unwrap());
        }
    }
}
