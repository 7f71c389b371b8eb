//! SLE variants and their local-martingale machinery: partition functions,
//! null-field operators D_I, drift operators A_I, the module M = U(vir) Z
//! built level by level with exact linear algebra, singular/null-vector
//! detection at generic or exceptional kappa, and infinitesimal Moebius
//! covariance checks.

use num_rational::BigRational;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::funcspace::{Element, VariableSet};
use crate::linalg::{kernel_of_combinations, RowSpace};
use crate::poly::{MPoly, Monomial, Var};
use crate::scalar::{consts, ScalarK};
use crate::series::MapSeries;
use crate::virasoro::{OperatorWord, VirasoroOps, WeightAssignment};

/// Exact kappa: fully symbolic, or a rational number.
#[derive(Debug, Clone, PartialEq)]
pub enum KappaSpec {
    Generic,
    Rational(BigRational),
}

impl KappaSpec {
    pub fn parse(s: &str) -> Result<KappaSpec> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("generic") {
            return Ok(KappaSpec::Generic);
        }
        parse_rational(s).map(KappaSpec::Rational)
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parts: Vec<&str> = s.split('/').collect();
    let bad = || Error::InvalidInput(format!("cannot parse rational '{s}'"));
    match parts.len() {
        1 => {
            let n: num_bigint::BigInt = parts[0].parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(n))
        }
        2 => {
            let n: num_bigint::BigInt = parts[0].trim().parse().map_err(|_| bad())?;
            let d: num_bigint::BigInt = parts[1].trim().parse().map_err(|_| bad())?;
            if num_traits::Zero::is_zero(&d) {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        _ => Err(bad()),
    }
}

/// Parse a rho entry: a rational, "kappa", or "kappa<+/-><rational>"
/// (e.g. "kappa-6"), as an exact element of Q(t).
pub fn parse_rho(s: &str) -> Result<ScalarK> {
    let s: String = s.trim().replace(' ', "");
    if let Some(rest) = s.strip_prefix("kappa") {
        if rest.is_empty() {
            return Ok(ScalarK::kappa());
        }
        let r = parse_rational(rest)?; // includes the sign
        return Ok(ScalarK::kappa().add_ref(&ScalarK::from_bigrational(&r)));
    }
    Ok(ScalarK::from_bigrational(&parse_rational(&s)?))
}

/// An SLE variant: curve and marked-point bookkeeping plus the partition
/// function, with its defining properties verified at construction.
#[derive(Debug, Clone)]
pub struct SleVariant {
    pub name: String,
    ctx: Arc<VariableSet>,
    /// kappa_I per curve (kappa or 16/kappa, or rational after specialization).
    pub kappas: Vec<ScalarK>,
    /// weights of the passive points y_K.
    pub h_y: Vec<ScalarK>,
    pub z: Element,
    /// Homogeneity degree Delta of Z, when homogeneous.
    pub delta: Option<ScalarK>,
    pub translation_invariant: bool,
    weights: WeightAssignment,
}

impl SleVariant {
    /// Chordal SLE: one curve, no marked points, Z = 1.
    pub fn chordal(f_depth: u32) -> Result<SleVariant> {
        let ctx = VariableSet::new(vec![Var::X(0)], f_depth)?;
        let z = Element::one(ctx.clone());
        SleVariant::custom("chordal", ctx, vec![ScalarK::kappa()], vec![], z)
    }

    /// SLE_kappa(rho_1..rho_M): one curve, M marked points,
    /// Z = prod_K (y_K - x)^{rho_K/kappa} prod_{J<K} (y_K - y_J)^{rho_J rho_K/(2 kappa)}.
    pub fn kappa_rho(rhos: &[ScalarK], f_depth: u32) -> Result<SleVariant> {
        let m = rhos.len();
        let mut chamber = vec![Var::X(0)];
        chamber.extend((0..m as u32).map(Var::Y));
        let ctx = VariableSet::new(chamber, f_depth)?;
        let k = ScalarK::kappa();
        let mut z = Element::one(ctx.clone());
        for (kk, rho) in rhos.iter().enumerate() {
            let e = rho.div_ref(&k)?;
            z = z.mul(&Element::diff_power(ctx.clone(), Var::Y(kk as u32), Var::X(0), e)?);
        }
        for j in 0..m {
            for kk in (j + 1)..m {
                let e = rhos[j]
                    .mul_ref(&rhos[kk])
                    .div_ref(&k.clone().scale_i64(2))?;
                z = z.mul(&Element::diff_power(
                    ctx.clone(),
                    Var::Y(kk as u32),
                    Var::Y(j as u32),
                    e,
                )?);
            }
        }
        let h_y: Vec<ScalarK> = rhos
            .iter()
            .map(|rho| {
                // h_y = rho (rho + 4 - kappa) / (4 kappa)
                rho.mul_ref(&rho.add_ref(&ScalarK::from_int(4)).sub_ref(&k))
                    .div_ref(&k.clone().scale_i64(4))
                    .unwrap()
            })
            .collect();
        let name = format!("kappa_rho[{}]", m);
        SleVariant::custom_with_hy(&name, ctx, vec![ScalarK::kappa()], h_y, z)
    }

    /// Double SLE, both curves paired: Z = (x2-x1)^{(kappa-6)/kappa}.
    pub fn double_paired(f_depth: u32) -> Result<SleVariant> {
        let ctx = VariableSet::new(vec![Var::X(0), Var::X(1)], f_depth)?;
        let k = ScalarK::kappa();
        let e = (k.clone() - ScalarK::from_int(6)).div_ref(&k)?;
        let z = Element::diff_power(ctx.clone(), Var::X(1), Var::X(0), e)?;
        SleVariant::custom(
            "double_paired",
            ctx,
            vec![ScalarK::kappa(), ScalarK::kappa()],
            vec![],
            z,
        )
    }

    /// Double SLE, both curves to infinity: Z = (x2-x1)^{2/kappa}.
    pub fn double_unpaired(f_depth: u32) -> Result<SleVariant> {
        let ctx = VariableSet::new(vec![Var::X(0), Var::X(1)], f_depth)?;
        let e = ScalarK::from_int(2).div_ref(&ScalarK::kappa())?;
        let z = Element::diff_power(ctx.clone(), Var::X(1), Var::X(0), e)?;
        SleVariant::custom(
            "double_unpaired",
            ctx,
            vec![ScalarK::kappa(), ScalarK::kappa()],
            vec![],
            z,
        )
    }

    /// The companion annihilated function zeta = (y-x)^{2/kappa} of the
    /// one-curve one-point variant (same weights as kappa(kappa-6)).
    pub fn kappa_rho_zeta(f_depth: u32) -> Result<SleVariant> {
        let ctx = VariableSet::new(vec![Var::X(0), Var::Y(0)], f_depth)?;
        let e = ScalarK::from_int(2).div_ref(&ScalarK::kappa())?;
        let z = Element::diff_power(ctx.clone(), Var::Y(0), Var::X(0), e)?;
        SleVariant::custom_with_hy(
            "kappa_rho_zeta",
            ctx,
            vec![ScalarK::kappa()],
            vec![consts::h_one_leg()],
            z,
        )
    }

    /// General constructor with h_{y_K} = one-leg weights computed from kappas.
    pub fn custom(
        name: &str,
        ctx: Arc<VariableSet>,
        kappas: Vec<ScalarK>,
        h_y: Vec<ScalarK>,
        z: Element,
    ) -> Result<SleVariant> {
        SleVariant::custom_with_hy(name, ctx, kappas, h_y, z)
    }

    fn custom_with_hy(
        name: &str,
        ctx: Arc<VariableSet>,
        kappas: Vec<ScalarK>,
        h_y: Vec<ScalarK>,
        z: Element,
    ) -> Result<SleVariant> {
        let n = kappas.len();
        let m = h_y.len();
        let points = ctx.chamber().len();
        if n + m
            > points
        {
            return Err(Error::InvalidInput(
                "more curves/marked points than chamber variables".into(),
            ));
        }
        let mut delta_map = BTreeMap::new();
        for (i, k) in kappas.iter().enumerate() {
            delta_map.insert(Var::X(i as u32), consts::h_for_kappa(k));
        }
        for (i, h) in h_y.iter().enumerate() {
            delta_map.insert(Var::Y(i as u32), h.clone());
        }
        let weights = WeightAssignment::new(consts::central_charge(), delta_map);
        let mut v = SleVariant {
            name: name.to_string(),
            ctx,
            kappas,
            h_y,
            z,
            delta: None,
            translation_invariant: false,
            weights,
        };
        // central charge: for a specialized variant the kappas are constants
        if let Some(k0) = v.kappas[0].as_rational() {
            let c = consts::central_charge().eval_at_kappa(&k0)?;
            v.weights.c = ScalarK::from_bigrational(&c);
        }
        // null-field equations are a hard requirement
        for i in 0..v.kappas.len() {
            let r = v.apply_d(i, &v.z)?;
            if !r.is_zero() {
                return Err(Error::VariantRejected(format!(
                    "D_{} does not annihilate Z: {}",
                    i + 1,
                    r
                )));
            }
        }
        // conditions (c) and (d) are recorded, not required
        let mut tr = Element::zero(v.ctx.clone());
        for &pv in v.ctx.chamber() {
            tr = tr.add(&v.z.derive(pv)?);
        }
        v.translation_invariant = tr.is_zero();
        v.delta = v.z.homogeneity_degree();
        Ok(v)
    }

    pub fn ctx(&self) -> &Arc<VariableSet> {
        &self.ctx
    }

    pub fn n_curves(&self) -> usize {
        self.kappas.len()
    }

    pub fn weights(&self) -> &WeightAssignment {
        &self.weights
    }

    pub fn ops(&self) -> VirasoroOps {
        VirasoroOps::new(self.ctx.clone(), self.weights.clone())
    }

    /// Specialize the whole variant at an exact rational kappa.
    pub fn specialize(&self, k0: &BigRational) -> Result<SleVariant> {
        let kappas: Result<Vec<ScalarK>> =
            self.kappas.iter().map(|k| k.specialize_kappa(k0)).collect();
        let h_y: Result<Vec<ScalarK>> =
            self.h_y.iter().map(|h| h.specialize_kappa(k0)).collect();
        let z = self.z.specialize_kappa(k0)?;
        SleVariant::custom_with_hy(
            &format!("{}@kappa={}", self.name, k0),
            self.ctx.clone(),
            kappas?,
            h_y?,
            z,
        )
    }

    pub fn at(&self, kappa: &KappaSpec) -> Result<SleVariant> {
        match kappa {
            KappaSpec::Generic => Ok(self.clone()),
            KappaSpec::Rational(k0) => self.specialize(k0),
        }
    }

    /// The null-field operator D_I applied to an element.
    pub fn apply_d(&self, i: usize, e: &Element) -> Result<Element> {
        let xi = Var::X(i as u32);
        let ki = &self.kappas[i];
        // (kappa_I/2) d^2/dx_I^2
        let mut out = e
            .derive(xi)?
            .derive(xi)?
            .scale(&ki.mul_ref(&ScalarK::from_ratio(1, 2)));
        // sum over other curves
        for j in 0..self.kappas.len() {
            if j == i {
                continue;
            }
            let xj = Var::X(j as u32);
            let inv1 = Element::diff_power(self.ctx.clone(), xj, xi, ScalarK::from_int(-1))?;
            let inv2 = Element::diff_power(self.ctx.clone(), xj, xi, ScalarK::from_int(-2))?;
            out = out.add(&inv1.mul(&e.derive(xj)?).scale(&ScalarK::from_int(2)));
            // (kappa_J - 6)/kappa_J = -2 h_{x_J}
            let coef = self.kappas[j]
                .sub_ref(&ScalarK::from_int(6))
                .div_ref(&self.kappas[j])?;
            out = out.add(&inv2.mul(e).scale(&coef));
        }
        // passive points
        for k in 0..self.h_y.len() {
            let yk = Var::Y(k as u32);
            let inv1 = Element::diff_power(self.ctx.clone(), yk, xi, ScalarK::from_int(-1))?;
            let inv2 = Element::diff_power(self.ctx.clone(), yk, xi, ScalarK::from_int(-2))?;
            out = out.add(&inv1.mul(&e.derive(yk)?).scale(&ScalarK::from_int(2)));
            out = out.add(&inv2.mul(e).scale(&self.h_y[k].scale_i64(-2)));
        }
        Ok(out)
    }

    /// The drift operator A_I = D_I + 2 sum_m p_m(-x_I, f) d/df_m.
    pub fn apply_a(&self, i: usize, e: &Element) -> Result<Element> {
        let mut out = self.apply_d(i, e)?;
        let minus_x = MPoly::var(Var::X(i as u32)).neg();
        for fv in e.f_vars() {
            if let Var::F(m) = fv {
                let de = e.derive(fv)?;
                if de.is_zero() {
                    continue;
                }
                let p = p_poly(m as i64, &minus_x);
                out = out.add(&de.mul_poly(&p).scale(&ScalarK::from_int(2)));
            }
        }
        Ok(out)
    }

    /// True iff every A_I annihilates the element.
    pub fn in_martingale_kernel(&self, e: &Element) -> Result<bool> {
        for i in 0..self.kappas.len() {
            if !self.apply_a(i, e)?.is_zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Sample condition (a) positivity of Z at random chamber points.
    pub fn positivity_sample(&self, samples: usize, t0: f64, seed: u64) -> Result<bool> {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let mut pt = BTreeMap::new();
            let mut x = rng.gen_range(-3.0..-2.0);
            for &v in self.ctx.chamber() {
                x += rng.gen_range(0.3..1.5);
                pt.insert(v, x);
            }
            for fv in self.z.f_vars() {
                pt.insert(fv, rng.gen_range(-0.5..0.5));
            }
            if self.z.evaluate(&pt, t0)? <= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The Loewner-coefficient transport polynomials:
/// p_{-2} = 1 and p_{-m} = -sum_{k=1}^{m-2} f_{-k} p_{-m+k}, where the f_{-1}
/// slot carries the given polynomial (typically -x_I). Matches the residue
/// definition Res_v v^{-2-m} (f(v)+f_{-1})^{-1}.
pub fn p_poly(m: i64, f_minus_1: &MPoly) -> MPoly {
    assert!(m <= -2);
    let mut table: Vec<MPoly> = vec![MPoly::one()]; // p_{-2}
    for mm in 3..=(-m) {
        // p_{-mm} = - sum_{k=1}^{mm-2} f_{-k} p_{-(mm-k)}
        let mut acc = MPoly::zero();
        for k in 1..=(mm - 2) {
            let f_k = if k == 1 {
                f_minus_1.clone()
            } else {
                MPoly::var(Var::F(-(k as i32)))
            };
            acc = acc.add(&f_k.mul(&table[(mm - k - 2) as usize]));
        }
        table.push(acc.neg());
    }
    table.pop().unwrap()
}

/// p_m via the residue definition, for cross-checks.
pub fn p_poly_residue(m: i64, x: Var, depth: u32) -> Result<MPoly> {
    let map = MapSeries::new(depth);
    let inv = map.expand_inverse_power(x, 1, m)?;
    // Res_v v^{-2-m} (f(v)-x)^{-1} = [v^{1+m}]
    let c = inv.coeff(1 + m)?;
    // the recursion convention stores f_{-1} = -x, i.e. 1/(f(v)+f_{-1})
    Ok(c)
}

/// Basis data of the module M = U(vir) Z up to a level.
#[derive(Debug, Clone, Serialize)]
pub struct ModuleBasis {
    pub variant: String,
    pub kappa: String,
    pub levels: Vec<LevelBasis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelBasis {
    pub level: u32,
    pub dimension: usize,
    pub words: Vec<OperatorWord>,
    pub elements: Vec<Element>,
}

impl ModuleBasis {
    pub fn graded_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.dimension).collect()
    }
}

/// Coordinate extraction shared by the module builder: a deterministic basis
/// of (sector, monomial) keys over a family of elements.
fn coordinate_vectors(elements: &[Element]) -> Vec<Vec<ScalarK>> {
    let mut keys: Vec<(crate::funcspace::Prefactor, Monomial)> = vec![];
    let mut seen = std::collections::BTreeSet::new();
    for e in elements {
        for (k, _) in e.coordinates() {
            if seen.insert(k.clone()) {
                keys.push(k);
            }
        }
    }
    keys.sort();
    let index: BTreeMap<_, _> = keys.iter().cloned().zip(0..).collect();
    elements
        .iter()
        .map(|e| {
            let mut v = vec![ScalarK::zero(); keys.len()];
            for (k, c) in e.coordinates() {
                v[index[&k] as usize] = c;
            }
            v
        })
        .collect()
}

/// Build M level by level: apply L_{-j} to the level-(l-j) basis, reduce
/// exactly, keep an independent set (candidates scanned in lexicographic word
/// order so the chosen representatives are reproducible), and verify that
/// every kept element is annihilated by all A_I.
pub fn build_module(variant: &SleVariant, max_level: u32) -> Result<ModuleBasis> {
    let ops = variant.ops();
    let mut levels: Vec<LevelBasis> = vec![LevelBasis {
        level: 0,
        dimension: usize::from(!variant.z.is_zero()),
        words: vec![OperatorWord(vec![])],
        elements: vec![variant.z.clone()],
    }];
    for level in 1..=max_level {
        // candidates: words (-j) . w for w a basis word of level-j, in lex order
        let mut cand: Vec<(OperatorWord, Element)> = vec![];
        for j in 1..=level {
            let lower = &levels[(level - j) as usize];
            for (w, b) in lower.words.iter().zip(lower.elements.iter()) {
                let mut word = vec![-(j as i64)];
                word.extend(w.0.iter().copied());
                let img = ops.apply(-(j as i64), b)?;
                cand.push((OperatorWord(word), img));
            }
        }
        cand.sort_by(|a, b| a.0.cmp(&b.0));
        let vecs = coordinate_vectors(&cand.iter().map(|c| c.1.clone()).collect::<Vec<_>>());
        let ncols = vecs.first().map(|v| v.len()).unwrap_or(0);
        let mut space = RowSpace::new(ncols);
        let mut words = vec![];
        let mut elements = vec![];
        for ((w, e), v) in cand.into_iter().zip(vecs) {
            if e.is_zero() {
                continue;
            }
            if space.insert(v) {
                // membership in the martingale kernel is part of the contract
                for i in 0..variant.n_curves() {
                    let r = variant.apply_a(i, &e)?;
                    if !r.is_zero() {
                        return Err(Error::Inconsistent(format!(
                            "module element {} escapes Ker A_{}",
                            w.display(),
                            i + 1
                        )));
                    }
                }
                words.push(w);
                elements.push(e);
            }
        }
        levels.push(LevelBasis {
            level,
            dimension: words.len(),
            words,
            elements,
        });
    }
    Ok(ModuleBasis {
        variant: variant.name.clone(),
        kappa: "as-constructed".into(),
        levels,
    })
}

/// All canonical spanning words of a given level: partitions of `level` into
/// parts >= 1, each written as L_{-p1} ... L_{-pk} with p1 >= p2 >= ...
/// (commutator closure makes these span all words of that level).
pub fn partition_words(level: u32) -> Vec<OperatorWord> {
    fn rec(rem: u32, maxp: u32, cur: &mut Vec<i64>, out: &mut Vec<OperatorWord>) {
        if rem == 0 {
            out.push(OperatorWord(cur.clone()));
            return;
        }
        for p in (1..=rem.min(maxp)).rev() {
            cur.push(-(p as i64));
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = vec![];
    rec(level, level.max(1), &mut vec![], &mut out);
    out.sort();
    out
}

/// Report of null combinations and singular vectors at one level.
#[derive(Debug, Clone, Serialize)]
pub struct SingularReport {
    pub variant: String,
    pub level: u32,
    pub words: Vec<OperatorWord>,
    /// exact combinations of the word images that vanish identically
    pub null_combinations: Vec<Vec<ScalarK>>,
    /// nonzero elements at this level annihilated by L_1 and L_2
    pub singular_vectors: Vec<SingularVector>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularVector {
    pub combination: Vec<ScalarK>,
    pub element: Element,
}

/// Detect null vectors (word combinations that vanish) and singular vectors
/// (nonzero level elements killed by L_1 and L_2, which generate the whole
/// raising side) at the given level.
pub fn find_singular_null(variant: &SleVariant, level: u32) -> Result<SingularReport> {
    let ops = variant.ops();
    let words = partition_words(level);
    let mut images = vec![];
    for w in &words {
        images.push(ops.apply_word(w, &variant.z)?);
    }
    let vecs = coordinate_vectors(&images);
    let null_combinations = kernel_of_combinations(&vecs);

    // singular vectors: combos c with L_1 v = L_2 v = 0, v = sum c_i img_i != 0
    let mut raised: Vec<Element> = vec![];
    for img in &images {
        let l1 = ops.apply(1, img)?;
        let l2 = ops.apply(2, img)?;
        raised.push(join_elements(&l1, &l2));
    }
    let raised_vecs = coordinate_vectors(&raised);
    let mut singular_vectors = vec![];
    for combo in kernel_of_combinations(&raised_vecs) {
        let mut v = Element::zero(variant.ctx().clone());
        for (c, img) in combo.iter().zip(images.iter()) {
            v = v.add(&img.scale(c));
        }
        if !v.is_zero() {
            singular_vectors.push(SingularVector {
                combination: combo,
                element: v,
            });
        }
    }
    Ok(SingularReport {
        variant: variant.name.clone(),
        level,
        words,
        null_combinations,
        singular_vectors,
    })
}

/// Pack two elements into one coordinate space (for joint kernel conditions):
/// represented by tagging the second element's sectors with a shifted
/// auxiliary monomial power so coordinates cannot collide.
fn join_elements(a: &Element, b: &Element) -> Element {
    // multiply b by the auxiliary tag variable to separate coordinates
    let tag = MPoly::var(Var::Aux(7));
    a.add(&b.mul_poly(&tag))
}

/// Result of applying one Moebius generator to Z.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum MobiusOutcome {
    /// generator annihilates Z (exact infinitesimal covariance)
    Annihilated,
    /// generator maps Z to lambda * Z; the process law is unchanged since Z
    /// enters the drift only through d log Z
    Eigenvector { eigenvalue: ScalarK },
    /// genuinely not covariant
    Fails,
}

#[derive(Debug, Clone, Serialize)]
pub struct MobiusReport {
    pub variant: String,
    /// outcomes for n = -1 (translation), 0 (dilatation), +1 (special conformal)
    pub translation: MobiusOutcome,
    pub dilatation: MobiusOutcome,
    pub special_conformal: MobiusOutcome,
}

impl MobiusReport {
    pub fn fully_covariant(&self) -> bool {
        self.translation == MobiusOutcome::Annihilated
            && self.dilatation == MobiusOutcome::Annihilated
            && self.special_conformal == MobiusOutcome::Annihilated
    }

    pub fn invariant_up_to_constant(&self) -> bool {
        !matches!(self.translation, MobiusOutcome::Fails)
            && !matches!(self.dilatation, MobiusOutcome::Fails)
            && !matches!(self.special_conformal, MobiusOutcome::Fails)
    }
}

/// Apply the three first-order generators
///   sum_v ( v^{1+n} d/dv + (1+n) delta_v v^n ),  n = -1, 0, 1,
/// to Z and classify each outcome.
pub fn mobius_covariance_check(variant: &SleVariant) -> Result<MobiusReport> {
    let mut outcomes = vec![];
    for n in [-1i64, 0, 1] {
        let mut img = Element::zero(variant.ctx().clone());
        for &v in variant.ctx().chamber().to_vec().iter() {
            let vpow = |e: u32| MPoly::var(v).pow(e);
            let mono = match n {
                -1 => MPoly::one(),
                0 => vpow(1),
                1 => vpow(2),
                _ => unreachable!(),
            };
            img = img.add(&variant.z.derive(v)?.mul_poly(&mono));
            if n >= 0 {
                let w = variant.weights().delta.get(&v).cloned().unwrap_or_else(ScalarK::zero);
                let sc = if n == 0 { MPoly::one() } else { vpow(1).scale_ratio(2, 1) };
                img = img.add(&variant.z.mul_poly(&sc.scale(&w)));
            }
        }
        outcomes.push(classify_against(&variant.z, &img));
    }
    Ok(MobiusReport {
        variant: variant.name.clone(),
        translation: outcomes[0].clone(),
        dilatation: outcomes[1].clone(),
        special_conformal: outcomes[2].clone(),
    })
}

fn classify_against(z: &Element, img: &Element) -> MobiusOutcome {
    if img.is_zero() {
        return MobiusOutcome::Annihilated;
    }
    // proportional to Z?
    let zc = z.coordinates();
    let ic = img.coordinates();
    if let (Some(((k0, _), c0)), true) = (
        zc.first().map(|(k, c)| ((k.clone(), ()), c.clone())),
        !zc.is_empty(),
    ) {
        let _ = k0;
        // candidate lambda from the first coordinate of z
        let first_key = &zc[0].0;
        let lam = ic
            .iter()
            .find(|(k, _)| k == first_key)
            .map(|(_, c)| c.div_ref(&c0).ok())
            .flatten();
        if let Some(lam) = lam {
            if img.sub(&z.scale(&lam)).is_zero() && !lam.is_zero() {
                return MobiusOutcome::Eigenvector { eigenvalue: lam };
            }
        }
    }
    MobiusOutcome::Fails
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn p_polynomials_match_footnote_and_residue() {
        let x = MPoly::var(Var::X(0)).neg();
        assert_eq!(p_poly(-2, &x), MPoly::one());
        // p_{-3} = -f_{-1} with f_{-1} = -x  ->  x
        assert_eq!(p_poly(-3, &x), MPoly::var(Var::X(0)));
        // p_{-4} = -f_{-2} + f_{-1}^2 -> x^2 - f_{-2}
        assert_eq!(
            p_poly(-4, &x),
            MPoly::var(Var::X(0)).pow(2).sub(&MPoly::var(Var::F(-2)))
        );
        // residue definition agrees for -2 >= m >= -7
        for m in -7i64..=-2 {
            let via_residue = p_poly_residue(m, Var::X(0), 10).unwrap();
            assert_eq!(p_poly(m, &x), via_residue, "m = {m}");
        }
    }

    #[test]
    fn chordal_drift_examples() {
        let v = SleVariant::chordal(6).unwrap();
        let ctx = v.ctx().clone();
        // A x = 0 (driving process over constant Z is a martingale)
        let x = Element::var(ctx.clone(), Var::X(0));
        assert!(v.apply_a(0, &x).unwrap().is_zero());
        // A (x^2 - (kappa/2) f_{-2}) = 0
        let e = Element::from_poly(
            ctx.clone(),
            MPoly::var(Var::X(0)).pow(2).sub(
                &MPoly::var(Var::F(-2)).scale(&ScalarK::kappa().mul_ref(&ScalarK::from_ratio(1, 2))),
            ),
        );
        assert!(v.apply_a(0, &e).unwrap().is_zero());
        // and the broken combination x^2 - f_{-2} is not annihilated
        let bad = Element::from_poly(
            ctx,
            MPoly::var(Var::X(0)).pow(2).sub(&MPoly::var(Var::F(-2))),
        );
        assert!(!v.apply_a(0, &bad).unwrap().is_zero());
    }

    #[test]
    fn kappa_rho_capacity_martingale() {
        // A( ((y-x)^2 - (3kappa-8)/2 f_{-2}) Z ) = 0 for rho = kappa - 6
        let rho = ScalarK::kappa().sub_ref(&ScalarK::from_int(6));
        let v = SleVariant::kappa_rho(&[rho], 6).unwrap();
        let ctx = v.ctx().clone();
        let ymx = Element::var(ctx.clone(), Var::Y(0)).sub(&Element::var(ctx.clone(), Var::X(0)));
        let obs = ymx.mul(&ymx).sub(&Element::from_poly(
            ctx,
            MPoly::var(Var::F(-2)).scale(
                &ScalarK::kappa()
                    .scale_i64(3)
                    .sub_ref(&ScalarK::from_int(8))
                    .mul_ref(&ScalarK::from_ratio(1, 2)),
            ),
        ));
        let e = obs.mul(&v.z);
        assert!(v.apply_a(0, &e).unwrap().is_zero());
    }

    #[test]
    fn variant_construction_rejects_bad_z() {
        // Z = (y-x)^{1/3} does not satisfy the null-field equation generically
        let ctx = VariableSet::new(vec![Var::X(0), Var::Y(0)], 4).unwrap();
        let z = Element::diff_power(ctx.clone(), Var::Y(0), Var::X(0), ScalarK::from_ratio(1, 3))
            .unwrap();
        let r = SleVariant::custom_with_hy(
            "bad",
            ctx,
            vec![ScalarK::kappa()],
            vec![consts::h_one_leg()],
            z,
        );
        assert!(matches!(r, Err(Error::VariantRejected(_))));
    }

    #[test]
    fn double_variants_satisfy_null_field() {
        assert!(SleVariant::double_paired(4).is_ok());
        assert!(SleVariant::double_unpaired(4).is_ok());
        assert!(SleVariant::kappa_rho_zeta(4).is_ok());
    }

    #[test]
    fn drift_commutator_relation() {
        // ([L_n, A_I] - q_n A_I) e = 0 for n in {0,-1,-2}
        let rho = ScalarK::kappa().sub_ref(&ScalarK::from_int(6));
        let v = SleVariant::kappa_rho(&[rho], 10).unwrap();
        let ctx = v.ctx().clone();
        let ops = v.ops();
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let vars = [Var::X(0), Var::Y(0), Var::F(-2), Var::F(-3)];
        for _ in 0..5 {
            let mut p = MPoly::zero();
            for _ in 0..rng.gen_range(1..4) {
                let mut m = MPoly::constant(ScalarK::from_int(rng.gen_range(-3i64..=3)));
                for _ in 0..rng.gen_range(0..3) {
                    m = m.mul(&MPoly::var(vars[rng.gen_range(0..vars.len())]));
                }
                p = p.add(&m);
            }
            let e = Element::from_poly(ctx.clone(), p);
            for n in [0i64, -1, -2] {
                let lhs = ops
                    .apply(n, &v.apply_a(0, &e).unwrap())
                    .unwrap();
                let rhs = v.apply_a(0, &ops.apply(n, &e).unwrap()).unwrap();
                let q = ops.q_poly(n, Var::X(0), e.f_support_depth().max(2) + 2).unwrap();
                let expect = v.apply_a(0, &e).unwrap().mul_poly(&q);
                let resid = lhs.sub(&rhs).sub(&expect);
                assert!(resid.is_zero(), "n = {n}: {resid}");
            }
        }
    }

    #[test]
    fn module_level_one_vanishes_for_translation_invariant_weight_zero() {
        // L_{-1} Z = 0 for kappa(kappa-6)
        let rho = ScalarK::kappa().sub_ref(&ScalarK::from_int(6));
        let v = SleVariant::kappa_rho(&[rho], 6).unwrap();
        let img = v.ops().apply(-1, &v.z).unwrap();
        assert!(img.is_zero(), "{img}");
    }

    #[test]
    fn chordal_graded_dimensions() {
        let v = SleVariant::chordal(8).unwrap();
        let basis = build_module(&v, 6).unwrap();
        assert_eq!(basis.graded_dims(), vec![1, 1, 1, 2, 3, 4, 6]);
    }

    #[test]
    fn exceptional_kappa_six_trivial_module() {
        let v = SleVariant::chordal(6)
            .unwrap()
            .specialize(&BigRational::from_integer(6.into()))
            .unwrap();
        let basis = build_module(&v, 3).unwrap();
        assert_eq!(basis.graded_dims(), vec![1, 0, 0, 0]);
    }

    #[test]
    fn singular_vector_at_eight_thirds() {
        let rho = ScalarK::kappa().sub_ref(&ScalarK::from_int(6));
        let v = SleVariant::kappa_rho(&[rho], 6)
            .unwrap()
            .specialize(&BigRational::new(8.into(), 3.into()))
            .unwrap();
        let rep = find_singular_null(&v, 2).unwrap();
        assert!(!rep.singular_vectors.is_empty());
        // the singular vector is proportional to (y-x)^2 Z and
        // L_{-2} Z = (5/8) (y-x)^2 Z
        let img = v.ops().apply(-2, &v.z).unwrap();
        let ctx = v.ctx().clone();
        let ymx = Element::var(ctx.clone(), Var::Y(0)).sub(&Element::var(ctx, Var::X(0)));
        let expect = ymx.mul(&ymx).mul(&v.z).scale(&ScalarK::from_ratio(5, 8));
        assert_eq!(img, expect);
    }

    #[test]
    fn mobius_outcomes() {
        // kappa(kappa-6): all three generators annihilate Z
        let rho = ScalarK::kappa().sub_ref(&ScalarK::from_int(6));
        let v = SleVariant::kappa_rho(&[rho], 4).unwrap();
        let rep = mobius_covariance_check(&v).unwrap();
        assert!(rep.fully_covariant(), "{rep:?}");
        // chordal: translation passes, dilatation passes as an eigenvector
        // (constant multiples of Z drive the same SLE), special conformal fails
        let ch = SleVariant::chordal(4).unwrap();
        let rep = mobius_covariance_check(&ch).unwrap();
        assert_eq!(rep.translation, MobiusOutcome::Annihilated);
        assert!(matches!(rep.dilatation, MobiusOutcome::Eigenvector { .. }));
        assert_eq!(rep.special_conformal, MobiusOutcome::Fails);
        assert!(!rep.fully_covariant());
    }
}
