//! Monotone piecewise-constant and piecewise-affine curves over exact rationals.
//!
//! Every curve in the markets lives on `[0, +inf)`:
//!
//! * [`AskCurve`]: quantity -> unit price a producer asks, staircase on `[0, kappa]`
//!   and the loss-of-load cost beyond capacity.
//! * [`OfferCurve`]: price -> quantity offered, the generalized inverse of an ask.
//! * [`BidCurve`]: allowance quantity -> unit price a producer is willing to pay.
//! * [`AllowanceDemand`]: price -> allowance quantity demanded.
//! * [`DemandCurve`]: price -> electricity demand, decreasing and left-continuous,
//!   made of constant or affine pieces.

use std::cmp::Ordering;

use num_traits::{Signed, Zero};

use crate::rational::{decimal_string, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CurveError {
    #[error("curve has no breakpoints")]
    Empty,
    #[error("first breakpoint must be at 0, found {0}")]
    NotAnchoredAtZero(String),
    #[error("breakpoints must be strictly increasing (at {0})")]
    UnorderedBreakpoints(String),
    #[error("values are not {direction:?} at x = {at}")]
    NotMonotone { direction: Direction, at: String },
    #[error("negative value {value} at x = {at}")]
    Negative { value: String, at: String },
    #[error("right-continuous curve must have origin equal to its first value")]
    OriginMismatch,
    #[error("cannot combine curves with different direction or continuity")]
    MismatchedKinds,
    #[error("stair widths must be positive (stair {0})")]
    EmptyStair(usize),
    #[error("ask level {level} exceeds the loss-of-load cost {p_lolc}")]
    AboveLossOfLoad { level: String, p_lolc: String },
    #[error("demand must be decreasing: piece starting at {0} has a positive slope")]
    IncreasingDemand(String),
    #[error("last demand piece must be flat (slope 0)")]
    UnboundedTail,
    #[error("demand must be positive at price 0")]
    NoDemandAtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    fn allows(self, from: &Rational, to: &Rational) -> bool {
        match self {
            Direction::Increasing => from <= to,
            Direction::Decreasing => from >= to,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Continuity {
    LeftContinuous,
    RightContinuous,
}

/// A monotone step function on `[0, +inf)`.
///
/// `points[i] = (x_i, y_i)` means the curve equals `y_i` on the open interval
/// `(x_i, x_{i+1})`, with `x_0 = 0` and the last value extending to infinity.
/// At an interior breakpoint the value is `y_{i-1}` (left-continuous) or `y_i`
/// (right-continuous). The value at `0` is stored separately as `origin`, since
/// a left-continuous curve has nothing to its left at the origin.
///
/// Construction normalizes: equal-x entries keep the last value, and breakpoints
/// across which the value does not change are dropped. Two curves describing the
/// same function therefore compare equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepCurve {
    origin: Rational,
    points: Vec<(Rational, Rational)>,
    direction: Direction,
    continuity: Continuity,
}

/// Price -> quantity offered on the power exchange.
pub type OfferCurve = StepCurve;

/// Price -> allowance quantity demanded on the carbon auction.
pub type AllowanceDemand = StepCurve;

impl StepCurve {
    pub fn new(
        origin: Rational,
        points: Vec<(Rational, Rational)>,
        direction: Direction,
        continuity: Continuity,
    ) -> Result<Self, CurveError> {
        let mut merged: Vec<(Rational, Rational)> = Vec::with_capacity(points.len());
        for (x, y) in points {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 = y,
                Some(last) if last.0 > x => {
                    return Err(CurveError::UnorderedBreakpoints(decimal_string(&x)))
                }
                _ => merged.push((x, y)),
            }
        }
        let first = merged.first().ok_or(CurveError::Empty)?;
        if !first.0.is_zero() {
            return Err(CurveError::NotAnchoredAtZero(decimal_string(&first.0)));
        }
        if continuity == Continuity::RightContinuous && origin != first.1 {
            return Err(CurveError::OriginMismatch);
        }
        if !direction.allows(&origin, &first.1) {
            return Err(CurveError::NotMonotone {
                direction,
                at: "0".into(),
            });
        }
        for w in merged.windows(2) {
            if !direction.allows(&w[0].1, &w[1].1) {
                return Err(CurveError::NotMonotone {
                    direction,
                    at: decimal_string(&w[1].0),
                });
            }
        }
        let mut points: Vec<(Rational, Rational)> = Vec::with_capacity(merged.len());
        for (x, y) in merged {
            match points.last() {
                Some(last) if last.1 == y => {}
                _ => points.push((x, y)),
            }
        }
        Ok(StepCurve {
            origin,
            points,
            direction,
            continuity,
        })
    }

    /// Builds a curve whose value at 0 equals the first listed value.
    pub fn from_points(
        points: Vec<(Rational, Rational)>,
        direction: Direction,
        continuity: Continuity,
    ) -> Result<Self, CurveError> {
        let origin = points.first().ok_or(CurveError::Empty)?.1.clone();
        Self::new(origin, points, direction, continuity)
    }

    /// Constant curve.
    pub fn constant(value: Rational, direction: Direction, continuity: Continuity) -> Self {
        StepCurve {
            origin: value.clone(),
            points: vec![(Rational::zero(), value)],
            direction,
            continuity,
        }
    }

    /// Tabulates a curve from a finite set of candidate breakpoints. `after(x)`
    /// must return the value on the open interval just to the right of `x`.
    fn tabulate(
        mut xs: Vec<Rational>,
        origin: Rational,
        after: impl Fn(&Rational) -> Rational,
        direction: Direction,
        continuity: Continuity,
    ) -> Result<Self, CurveError> {
        xs.push(Rational::zero());
        xs.retain(|x| !x.is_negative());
        xs.sort();
        xs.dedup();
        let points = xs.into_iter().map(|x| {
            let y = after(&x);
            (x, y)
        });
        Self::new(origin, points.collect(), direction, continuity)
    }

    pub fn origin(&self) -> &Rational {
        &self.origin
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// Value beyond the last breakpoint.
    pub fn tail_value(&self) -> &Rational {
        &self.points.last().expect("non-empty by construction").1
    }

    /// Breakpoints where the value changes (excluding the anchor at 0).
    pub fn jumps(&self) -> impl Iterator<Item = &Rational> {
        self.points.iter().skip(1).map(|(x, _)| x)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = &Rational> {
        self.points.iter().map(|(x, _)| x)
    }

    /// Index of the last point with `x_i <= x` (`strict = false`) or `x_i < x`.
    fn piece_index(&self, x: &Rational, strict: bool) -> usize {
        let n = self.points.partition_point(|(xi, _)| match xi.cmp(x) {
            Ordering::Less => true,
            Ordering::Equal => !strict,
            Ordering::Greater => false,
        });
        n.saturating_sub(1)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        if x.is_zero() {
            return self.origin.clone();
        }
        match self.continuity {
            Continuity::LeftContinuous => self.eval_left(x),
            Continuity::RightContinuous => self.eval_right(x),
        }
    }

    /// `lim_{y -> x^-} f(y)`; at 0 this is the value at 0.
    pub fn eval_left(&self, x: &Rational) -> Rational {
        if !x.is_positive() {
            return self.origin.clone();
        }
        self.points[self.piece_index(x, true)].1.clone()
    }

    /// `lim_{y -> x^+} f(y)`.
    pub fn eval_right(&self, x: &Rational) -> Rational {
        if x.is_negative() {
            return self.origin.clone();
        }
        self.points[self.piece_index(x, false)].1.clone()
    }

    /// Pointwise sum of curves sharing direction and continuity.
    pub fn sum(curves: &[StepCurve]) -> Result<StepCurve, CurveError> {
        let first = curves.first().ok_or(CurveError::Empty)?;
        if curves
            .iter()
            .any(|c| c.direction != first.direction || c.continuity != first.continuity)
        {
            return Err(CurveError::MismatchedKinds);
        }
        let xs: Vec<Rational> = curves
            .iter()
            .flat_map(|c| c.breakpoints().cloned())
            .collect();
        let origin = curves.iter().map(|c| c.origin.clone()).sum();
        Self::tabulate(
            xs,
            origin,
            |x| curves.iter().map(|c| c.eval_right(x)).sum(),
            first.direction,
            first.continuity,
        )
    }
}

/// Pointwise sum of offer curves (aggregate supply).
pub fn aggregate(curves: &[OfferCurve]) -> Result<OfferCurve, CurveError> {
    StepCurve::sum(curves)
}

/// One stair of a staircase over quantities: covers `(previous upto, upto]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stair {
    pub upto: Rational,
    pub price: Rational,
}

impl Stair {
    pub fn new(upto: Rational, price: Rational) -> Self {
        Stair { upto, price }
    }
}

pub(crate) fn normalize_stairs(stairs: Vec<Stair>) -> Result<Vec<Stair>, CurveError> {
    if stairs.is_empty() {
        return Err(CurveError::Empty);
    }
    let mut prev = Rational::zero();
    for (i, s) in stairs.iter().enumerate() {
        if s.upto <= prev {
            return Err(CurveError::EmptyStair(i));
        }
        if s.price.is_negative() {
            return Err(CurveError::Negative {
                value: decimal_string(&s.price),
                at: decimal_string(&s.upto),
            });
        }
        prev = s.upto.clone();
    }
    let mut out: Vec<Stair> = Vec::with_capacity(stairs.len());
    for s in stairs {
        match out.last_mut() {
            Some(last) if last.price == s.price => last.upto = s.upto,
            _ => out.push(s),
        }
    }
    Ok(out)
}

/// Value of a staircase at quantity `q` inside its domain. `q = 0` takes the
/// first stair's value.
fn stair_value<'a>(stairs: &'a [Stair], q: &Rational) -> Option<&'a Rational> {
    let idx = stairs.partition_point(|s| &s.upto < q);
    stairs.get(idx).map(|s| &s.price)
}

/// A producer's ask on the power exchange: quantity -> unit price.
///
/// Stairs need not be monotone; admissibility only requires asks to stay above
/// the marginal cost. Quantities above capacity are asked at `p_lolc`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AskCurve {
    stairs: Vec<Stair>,
    p_lolc: Rational,
}

impl AskCurve {
    pub fn new(stairs: Vec<Stair>, p_lolc: Rational) -> Result<Self, CurveError> {
        let stairs = normalize_stairs(stairs)?;
        if let Some(s) = stairs.iter().find(|s| s.price > p_lolc) {
            return Err(CurveError::AboveLossOfLoad {
                level: decimal_string(&s.price),
                p_lolc: decimal_string(&p_lolc),
            });
        }
        Ok(AskCurve { stairs, p_lolc })
    }

    pub fn flat(price: Rational, kappa: Rational, p_lolc: Rational) -> Result<Self, CurveError> {
        Self::new(vec![Stair::new(kappa, price)], p_lolc)
    }

    pub fn stairs(&self) -> &[Stair] {
        &self.stairs
    }

    pub fn kappa(&self) -> &Rational {
        &self.stairs.last().expect("non-empty by construction").upto
    }

    pub fn p_lolc(&self) -> &Rational {
        &self.p_lolc
    }

    /// Quantity breakpoints `0 = q_0 < q_1 < ... < kappa`.
    pub fn quantity_breaks(&self) -> Vec<Rational> {
        std::iter::once(Rational::zero())
            .chain(self.stairs.iter().map(|s| s.upto.clone()))
            .collect()
    }

    pub fn eval(&self, q: &Rational) -> Rational {
        stair_value(&self.stairs, q)
            .cloned()
            .unwrap_or_else(|| self.p_lolc.clone())
    }

    /// Highest asked level on `[0, kappa]`.
    pub fn max_level(&self) -> &Rational {
        self.stairs
            .iter()
            .map(|s| &s.price)
            .max()
            .expect("non-empty")
    }

    /// `p -> sup{ q in [0, kappa] : ask(q) < p }`, with `sup(empty) = 0`.
    ///
    /// The strict inequality makes the result left-continuous: at a price equal
    /// to an ask level that stair is not yet offered.
    pub fn generalized_inverse(&self) -> OfferCurve {
        let xs = self.stairs.iter().map(|s| s.price.clone()).collect();
        let after = |p: &Rational| {
            self.stairs
                .iter()
                .filter(|s| &s.price <= p)
                .map(|s| s.upto.clone())
                .max()
                .unwrap_or_else(Rational::zero)
        };
        StepCurve::tabulate(
            xs,
            Rational::zero(),
            after,
            Direction::Increasing,
            Continuity::LeftContinuous,
        )
        .expect("ask sizes are increasing by construction")
    }
}

pub fn generalized_inverse(ask: &AskCurve) -> OfferCurve {
    ask.generalized_inverse()
}

/// A producer's bid on the allowance auction: quantity -> unit price, decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidCurve {
    stairs: Vec<Stair>,
}

impl BidCurve {
    pub fn new(stairs: Vec<Stair>) -> Result<Self, CurveError> {
        let stairs = normalize_stairs(stairs)?;
        for w in stairs.windows(2) {
            if w[1].price > w[0].price {
                return Err(CurveError::NotMonotone {
                    direction: Direction::Decreasing,
                    at: decimal_string(&w[0].upto),
                });
            }
        }
        Ok(BidCurve { stairs })
    }

    pub fn flat(price: Rational, w_max: Rational) -> Result<Self, CurveError> {
        Self::new(vec![Stair::new(w_max, price)])
    }

    pub fn stairs(&self) -> &[Stair] {
        &self.stairs
    }

    pub fn w_max(&self) -> &Rational {
        &self.stairs.last().expect("non-empty by construction").upto
    }

    /// Unit price bid for the `w`-th allowance; 0 beyond `w_max`.
    pub fn eval(&self, w: &Rational) -> Rational {
        stair_value(&self.stairs, w)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// `p -> sup{ w in [0, w_max] : bid(w) >= p }`, with `sup(empty) = 0`.
    ///
    /// Weak inequality: at the bid level the stair is still demanded, so the
    /// result is decreasing and left-continuous with value `w_max` at 0.
    pub fn allowance_demand(&self) -> AllowanceDemand {
        let xs = self.stairs.iter().map(|s| s.price.clone()).collect();
        let demanded_above = |p: &Rational| {
            self.stairs
                .iter()
                .filter(|s| &s.price > p)
                .map(|s| s.upto.clone())
                .max()
                .unwrap_or_else(Rational::zero)
        };
        StepCurve::tabulate(
            xs,
            self.w_max().clone(),
            demanded_above,
            Direction::Decreasing,
            Continuity::LeftContinuous,
        )
        .expect("allowance demand is decreasing by construction")
    }
}

/// One affine piece of a demand curve, covering `(start, next start]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandPiece {
    pub start: Rational,
    /// Right limit of demand at `start`.
    pub value: Rational,
    /// `dD/dp` on the piece, `<= 0`.
    pub slope: Rational,
}

impl DemandPiece {
    fn at(&self, p: &Rational) -> Rational {
        &self.value + &self.slope * (p - &self.start)
    }
}

/// Electricity demand: decreasing, left-continuous, positive at price 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandCurve {
    pieces: Vec<DemandPiece>,
}

impl DemandCurve {
    pub fn new(pieces: Vec<DemandPiece>) -> Result<Self, CurveError> {
        let first = pieces.first().ok_or(CurveError::Empty)?;
        if !first.start.is_zero() {
            return Err(CurveError::NotAnchoredAtZero(decimal_string(&first.start)));
        }
        for (i, piece) in pieces.iter().enumerate() {
            if piece.slope.is_positive() {
                return Err(CurveError::IncreasingDemand(decimal_string(&piece.start)));
            }
            if piece.value.is_negative() {
                return Err(CurveError::Negative {
                    value: decimal_string(&piece.value),
                    at: decimal_string(&piece.start),
                });
            }
            if let Some(next) = pieces.get(i + 1) {
                if next.start <= piece.start {
                    return Err(CurveError::UnorderedBreakpoints(decimal_string(&next.start)));
                }
                let end = piece.at(&next.start);
                if end.is_negative() {
                    return Err(CurveError::Negative {
                        value: decimal_string(&end),
                        at: decimal_string(&next.start),
                    });
                }
                if next.value > end {
                    return Err(CurveError::NotMonotone {
                        direction: Direction::Decreasing,
                        at: decimal_string(&next.start),
                    });
                }
            }
        }
        if !pieces.last().expect("non-empty").slope.is_zero() {
            return Err(CurveError::UnboundedTail);
        }
        if !first.value.is_positive() {
            return Err(CurveError::NoDemandAtZero);
        }
        let mut merged: Vec<DemandPiece> = Vec::with_capacity(pieces.len());
        for piece in pieces {
            match merged.last() {
                Some(last) if last.slope == piece.slope && last.at(&piece.start) == piece.value => {}
                _ => merged.push(piece),
            }
        }
        Ok(DemandCurve { pieces: merged })
    }

    /// Step demand: `points[i] = (p_i, q_i)` gives quantity `q_i` on `(p_i, p_{i+1}]`
    /// (and at 0 for the first point).
    pub fn step(points: Vec<(Rational, Rational)>) -> Result<Self, CurveError> {
        Self::new(
            points
                .into_iter()
                .map(|(start, value)| DemandPiece {
                    start,
                    value,
                    slope: Rational::zero(),
                })
                .collect(),
        )
    }

    /// Continuous piecewise-linear demand through `points`, flat after the last one.
    pub fn linear(points: Vec<(Rational, Rational)>) -> Result<Self, CurveError> {
        let mut pieces = Vec::with_capacity(points.len());
        for (i, (p, q)) in points.iter().enumerate() {
            let slope = match points.get(i + 1) {
                Some((p2, q2)) => {
                    if p2 <= p {
                        return Err(CurveError::UnorderedBreakpoints(decimal_string(p2)));
                    }
                    (q2 - q) / (p2 - p)
                }
                None => Rational::zero(),
            };
            pieces.push(DemandPiece {
                start: p.clone(),
                value: q.clone(),
                slope,
            });
        }
        Self::new(pieces)
    }

    pub fn pieces(&self) -> &[DemandPiece] {
        &self.pieces
    }

    pub fn is_step(&self) -> bool {
        self.pieces.iter().all(|p| p.slope.is_zero())
    }

    /// True when the curve has no jumps.
    pub fn is_continuous(&self) -> bool {
        self.pieces
            .windows(2)
            .all(|w| w[0].at(&w[1].start) == w[1].value)
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = &Rational> {
        self.pieces.iter().map(|p| &p.start)
    }

    fn piece_index(&self, p: &Rational, strict: bool) -> usize {
        let n = self.pieces.partition_point(|piece| match piece.start.cmp(p) {
            Ordering::Less => true,
            Ordering::Equal => !strict,
            Ordering::Greater => false,
        });
        n.saturating_sub(1)
    }

    /// The piece governing prices just to the right of `p`.
    pub fn piece_after(&self, p: &Rational) -> &DemandPiece {
        &self.pieces[self.piece_index(p, false)]
    }

    pub fn eval(&self, p: &Rational) -> Rational {
        if !p.is_positive() {
            return self.pieces[0].value.clone();
        }
        self.pieces[self.piece_index(p, true)].at(p)
    }

    pub fn eval_left(&self, p: &Rational) -> Rational {
        self.eval(p)
    }

    pub fn eval_right(&self, p: &Rational) -> Rational {
        if p.is_negative() {
            return self.pieces[0].value.clone();
        }
        self.piece_after(p).at(p)
    }

    /// Prices `p > 0` on sloped pieces where demand equals `level` exactly.
    pub fn crossings(&self, level: &Rational) -> Vec<Rational> {
        let mut out = Vec::new();
        for (i, piece) in self.pieces.iter().enumerate() {
            if piece.slope.is_zero() {
                continue;
            }
            let p = &piece.start + (level - &piece.value) / &piece.slope;
            let inside_end = match self.pieces.get(i + 1) {
                Some(next) => p <= next.start,
                None => true,
            };
            if p > piece.start && inside_end {
                out.push(p);
            }
        }
        out
    }
}
