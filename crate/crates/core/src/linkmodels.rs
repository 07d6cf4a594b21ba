//! Steady-state link-efficiency models for the five wireless power transfer
//! technologies:
//!
//! - LED optical (Lambertian emitter, photodetector with field of view)
//! - laser optical (collimated beam, inverse-square flux)
//! - RF beam (aperture-product far-field efficiency)
//! - inductive near-field (coupled resonant coils)
//! - capacitive near-field (coupled plates, parallel or series compensation)
//!
//! Every model produces a dimensionless environmental efficiency in `[0, 1]`;
//! the end-to-end link efficiency is the product of the transmitter
//! conversion stage, the environmental stage and the receiver conversion
//! stage. All functions are pure and generic over the scalar type.

use crate::real::Real;
use std::fmt;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Validation failure for a link-model parameter set.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LinkModelError {
    /// Emitter half angle outside the supported open interval.
    #[error("half angle must lie within (0, pi/2) and above the configured minimum")]
    HalfAngleOutOfRange,
    /// A scalar parameter failed validation.
    #[error("parameter {name} invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    /// An emission-spectrum grid failed validation.
    #[error("emission spectrum invalid: {reason}")]
    InvalidSpectrum { reason: &'static str },
    /// A link-geometry field failed validation.
    #[error("link geometry invalid: {reason}")]
    InvalidGeometry { reason: &'static str },
}

fn require(ok: bool, name: &'static str, reason: &'static str) -> Result<(), LinkModelError> {
    if ok {
        Ok(())
    } else {
        Err(LinkModelError::InvalidParameter { name, reason })
    }
}

fn unit_interval<T: Real>(value: T) -> bool {
    value.is_finite() && value >= T::zero() && value <= T::one()
}

// ---------------------------------------------------------------------------
// Efficiency chain
// ---------------------------------------------------------------------------

/// Three-stage efficiency chain of a power-transfer link: transmitter
/// conversion, environment, receiver conversion. Each stage lies in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyChain<T: Real> {
    eta_tr: T,
    eta_env: T,
    eta_rc: T,
}

impl<T: Real> EfficiencyChain<T> {
    pub fn new(eta_tr: T, eta_env: T, eta_rc: T) -> Result<Self, LinkModelError> {
        require(unit_interval(eta_tr), "eta_tr", "must lie in [0, 1]")?;
        require(unit_interval(eta_env), "eta_env", "must lie in [0, 1]")?;
        require(unit_interval(eta_rc), "eta_rc", "must lie in [0, 1]")?;
        Ok(Self {
            eta_tr,
            eta_env,
            eta_rc,
        })
    }

    pub fn eta_tr(&self) -> T {
        self.eta_tr
    }

    pub fn eta_env(&self) -> T {
        self.eta_env
    }

    pub fn eta_rc(&self) -> T {
        self.eta_rc
    }
}

/// Overall link efficiency: the product of the three chain stages.
pub fn end_to_end_efficiency<T: Real>(chain: &EfficiencyChain<T>) -> T {
    chain.eta_tr * chain.eta_env * chain.eta_rc
}

// ---------------------------------------------------------------------------
// Link geometry
// ---------------------------------------------------------------------------

/// Relative geometry of one transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry<T: Real> {
    /// Separation between transmitter and receiver in metres (> 0).
    pub distance: T,
    /// Angle between the receiver boresight and the arriving ray, radians in
    /// `[0, pi]`.
    pub incidence_angle: T,
    /// Angle between the transmitter boresight and the departing ray, radians
    /// in `[0, pi]`.
    pub irradiance_angle: T,
    /// Whether the straight path between the endpoints is unobstructed.
    pub los_clear: bool,
}

impl<T: Real> LinkGeometry<T> {
    pub fn new(
        distance: T,
        incidence_angle: T,
        irradiance_angle: T,
        los_clear: bool,
    ) -> Result<Self, LinkModelError> {
        if !(distance.is_finite() && distance > T::zero()) {
            return Err(LinkModelError::InvalidGeometry {
                reason: "distance must be finite and positive",
            });
        }
        let valid_angle = |a: T| a.is_finite() && a >= T::zero() && a <= T::pi();
        if !valid_angle(incidence_angle) {
            return Err(LinkModelError::InvalidGeometry {
                reason: "incidence angle must lie in [0, pi]",
            });
        }
        if !valid_angle(irradiance_angle) {
            return Err(LinkModelError::InvalidGeometry {
                reason: "irradiance angle must lie in [0, pi]",
            });
        }
        Ok(Self {
            distance,
            incidence_angle,
            irradiance_angle,
            los_clear,
        })
    }
}

// ---------------------------------------------------------------------------
// Lambertian order
// ---------------------------------------------------------------------------

/// Smallest emitter half angle accepted by [`lambertian_order`] for this
/// scalar type. Below it the order diverges faster than the scalar can
/// resolve `cos`.
pub fn default_min_half_angle<T: Real>() -> T {
    let eps_limited = (T::default_epsilon() * T::lit(8.0)).sqrt();
    eps_limited.max(T::lit(1e-6))
}

/// Lambertian mode order of an LED emitter from its half-power angle:
/// `m = -ln 2 / ln(cos(half_angle))`.
///
/// `half_angle` is in radians and must lie in `(0, pi/2)`; angles below the
/// configured minimum are rejected because the order diverges.
pub fn lambertian_order<T: Real>(half_angle: T) -> Result<T, LinkModelError> {
    lambertian_order_with_min(half_angle, default_min_half_angle())
}

/// [`lambertian_order`] with an explicit minimum accepted half angle.
pub fn lambertian_order_with_min<T: Real>(
    half_angle: T,
    min_half_angle: T,
) -> Result<T, LinkModelError> {
    if !(half_angle.is_finite() && half_angle >= min_half_angle && half_angle < T::frac_pi_2()) {
        return Err(LinkModelError::HalfAngleOutOfRange);
    }
    let c = half_angle.cos();
    if c >= T::one() || c <= T::zero() {
        return Err(LinkModelError::HalfAngleOutOfRange);
    }
    Ok(-(T::lit(2.0).ln()) / c.ln())
}

// ---------------------------------------------------------------------------
// LED optical (OWPT)
// ---------------------------------------------------------------------------

/// Angular/spectral emission map of an LED transmitter.
///
/// Sample values are spectral-angular flux in watts per (radian · metre);
/// integrating over the polar-angle and wavelength grids yields the total
/// emitted optical power in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSpectrum<T: Real> {
    wavelengths: Vec<T>,
    angles: Vec<T>,
    /// `flux[i][j]` is the sample at `angles[i]`, `wavelengths[j]`.
    flux: Vec<Vec<T>>,
}

impl<T: Real> EmissionSpectrum<T> {
    pub fn new(
        wavelengths: Vec<T>,
        angles: Vec<T>,
        flux: Vec<Vec<T>>,
    ) -> Result<Self, LinkModelError> {
        let strictly_increasing =
            |g: &[T]| g.windows(2).all(|w| w[0] < w[1]) && g.iter().all(|v| v.is_finite());
        if wavelengths.len() < 2 || !strictly_increasing(&wavelengths) {
            return Err(LinkModelError::InvalidSpectrum {
                reason: "wavelength grid needs at least 2 strictly increasing finite points",
            });
        }
        if angles.len() < 2 || !strictly_increasing(&angles) {
            return Err(LinkModelError::InvalidSpectrum {
                reason: "angle grid needs at least 2 strictly increasing finite points",
            });
        }
        if angles[0] < T::zero() || *angles.last().unwrap() > T::two_pi() {
            return Err(LinkModelError::InvalidSpectrum {
                reason: "angle grid must lie within [0, 2*pi]",
            });
        }
        if flux.len() != angles.len()
            || flux.iter().any(|row| row.len() != wavelengths.len())
        {
            return Err(LinkModelError::InvalidSpectrum {
                reason: "flux sample shape must be angles x wavelengths",
            });
        }
        if flux
            .iter()
            .any(|row| row.iter().any(|v| !(v.is_finite() && *v >= T::zero())))
        {
            return Err(LinkModelError::InvalidSpectrum {
                reason: "flux samples must be finite and non-negative",
            });
        }
        Ok(Self {
            wavelengths,
            angles,
            flux,
        })
    }

    pub fn wavelengths(&self) -> &[T] {
        &self.wavelengths
    }

    pub fn angles(&self) -> &[T] {
        &self.angles
    }

    pub fn flux(&self) -> &[Vec<T>] {
        &self.flux
    }
}

/// Total optical power emitted by an LED transmitter: the double integral of
/// the emission map over its polar-angle and wavelength grids, evaluated with
/// 2-D trapezoidal quadrature (exact for samples bilinear in the grids).
pub fn owpt_transmit_power<T: Real>(spectrum: &EmissionSpectrum<T>) -> T {
    let th = &spectrum.angles;
    let wl = &spectrum.wavelengths;
    let f = &spectrum.flux;
    let quarter = T::lit(0.25);
    let mut total = T::zero();
    for i in 0..th.len() - 1 {
        let dth = th[i + 1] - th[i];
        for j in 0..wl.len() - 1 {
            let dwl = wl[j + 1] - wl[j];
            let cell = f[i][j] + f[i + 1][j] + f[i][j + 1] + f[i + 1][j + 1];
            total += dth * dwl * cell * quarter;
        }
    }
    total
}

/// Receiver-side gain as a function of incidence angle: either a constant or
/// a piecewise-linear table (angle radians → gain), clamped to its end values
/// outside the tabulated range.
#[derive(Debug, Clone, PartialEq)]
pub enum Gain<T: Real> {
    Constant(T),
    Table(Vec<(T, T)>),
}

impl<T: Real> Gain<T> {
    pub fn unity() -> Self {
        Gain::Constant(T::one())
    }

    fn validate(&self, name: &'static str) -> Result<(), LinkModelError> {
        match self {
            Gain::Constant(g) => require(g.is_finite() && *g >= T::zero(), name, {
                "constant gain must be finite and non-negative"
            }),
            Gain::Table(points) => {
                require(!points.is_empty(), name, "gain table must not be empty")?;
                let angles_ok = points.windows(2).all(|w| w[0].0 < w[1].0)
                    && points.iter().all(|(a, _)| a.is_finite() && *a >= T::zero());
                require(angles_ok, name, {
                    "gain table angles must be finite, non-negative, strictly increasing"
                })?;
                let values_ok = points.iter().all(|(_, g)| g.is_finite() && *g >= T::zero());
                require(values_ok, name, "gain table values must be finite and non-negative")
            }
        }
    }

    /// Evaluates the gain at the given incidence angle.
    pub fn eval(&self, angle: T) -> T {
        match self {
            Gain::Constant(g) => *g,
            Gain::Table(points) => {
                if angle <= points[0].0 {
                    return points[0].1;
                }
                let last = points.len() - 1;
                if angle >= points[last].0 {
                    return points[last].1;
                }
                let hi = points.partition_point(|(a, _)| *a <= angle);
                let (a0, g0) = points[hi - 1];
                let (a1, g1) = points[hi];
                let t = (angle - a0) / (a1 - a0);
                g0 + (g1 - g0) * t
            }
        }
    }
}

/// Parameters of an LED optical link (emitter Lambertian pattern plus
/// photodetector aperture, field of view and front-end gains).
#[derive(Debug, Clone, PartialEq)]
pub struct OwptLedParams<T: Real> {
    half_angle: T,
    receiver_area: T,
    fov_width: T,
    filter_gain: Gain<T>,
    concentrator_gain: Gain<T>,
    /// Lambertian order derived from `half_angle` at construction.
    lambertian: T,
}

impl<T: Real> OwptLedParams<T> {
    /// `half_angle`: emitter half-power angle, radians in `(0, pi/2)`.
    /// `receiver_area`: photodetector aperture in m², > 0.
    /// `fov_width`: receiver field-of-view half width, radians in `(0, pi/2]`.
    pub fn new(
        half_angle: T,
        receiver_area: T,
        fov_width: T,
        filter_gain: Gain<T>,
        concentrator_gain: Gain<T>,
    ) -> Result<Self, LinkModelError> {
        let lambertian = lambertian_order(half_angle)?;
        require(
            receiver_area.is_finite() && receiver_area > T::zero(),
            "receiver_area",
            "must be finite and positive",
        )?;
        require(
            fov_width.is_finite() && fov_width > T::zero() && fov_width <= T::frac_pi_2(),
            "fov_width",
            "must lie in (0, pi/2]",
        )?;
        filter_gain.validate("filter_gain")?;
        concentrator_gain.validate("concentrator_gain")?;
        Ok(Self {
            half_angle,
            receiver_area,
            fov_width,
            filter_gain,
            concentrator_gain,
            lambertian,
        })
    }

    pub fn half_angle(&self) -> T {
        self.half_angle
    }

    pub fn receiver_area(&self) -> T {
        self.receiver_area
    }

    pub fn fov_width(&self) -> T {
        self.fov_width
    }

    pub fn lambertian_order(&self) -> T {
        self.lambertian
    }
}

/// DC channel gain of an LED optical link:
///
/// `(m + 1) * A / (2 pi d^2) * cos^m(irradiance) * g_f(incidence) *
/// g_c(incidence) * cos(incidence)` while the incidence angle is inside the
/// receiver field of view and the path is clear; 0 otherwise. The result is a
/// raw gain: it is not clamped here.
pub fn owpt_dc_gain<T: Real>(params: &OwptLedParams<T>, geom: &LinkGeometry<T>) -> T {
    if !geom.los_clear || geom.incidence_angle > params.fov_width {
        return T::zero();
    }
    let cos_irr = geom.irradiance_angle.cos();
    if cos_irr <= T::zero() {
        // The Lambertian pattern has no rearward emission.
        return T::zero();
    }
    let m = params.lambertian;
    let base = (m + T::one()) * params.receiver_area
        / (T::two_pi() * geom.distance * geom.distance);
    let incidence = geom.incidence_angle;
    base * cos_irr.powf(m)
        * params.filter_gain.eval(incidence)
        * params.concentrator_gain.eval(incidence)
        * incidence.cos()
}

/// Optical power collected by the receiver: transmit power times DC gain.
pub fn owpt_received_power<T: Real>(
    spectrum: &EmissionSpectrum<T>,
    params: &OwptLedParams<T>,
    geom: &LinkGeometry<T>,
) -> T {
    owpt_transmit_power(spectrum) * owpt_dc_gain(params, geom)
}

// ---------------------------------------------------------------------------
// Laser optical
// ---------------------------------------------------------------------------

/// Parameters of a laser optical link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserParams<T: Real> {
    /// Source radiance in W/(sr·m²)·m² aggregate units, > 0.
    radiance: T,
    /// Emitting aperture area in m², > 0.
    source_area: T,
    /// Receiver absorption efficiency in [0, 1].
    absorption_eff: T,
}

impl<T: Real> LaserParams<T> {
    pub fn new(radiance: T, source_area: T, absorption_eff: T) -> Result<Self, LinkModelError> {
        require(
            radiance.is_finite() && radiance > T::zero(),
            "radiance",
            "must be finite and positive",
        )?;
        require(
            source_area.is_finite() && source_area > T::zero(),
            "source_area",
            "must be finite and positive",
        )?;
        require(
            unit_interval(absorption_eff),
            "absorption_eff",
            "must lie in [0, 1]",
        )?;
        Ok(Self {
            radiance,
            source_area,
            absorption_eff,
        })
    }

    pub fn radiance(&self) -> T {
        self.radiance
    }

    pub fn source_area(&self) -> T {
        self.source_area
    }

    pub fn absorption_eff(&self) -> T {
        self.absorption_eff
    }
}

/// Absorbed flux of a laser link: `radiance * source_area * absorption_eff /
/// d^2`, or 0 when the path is blocked.
pub fn laser_received_flux<T: Real>(params: &LaserParams<T>, geom: &LinkGeometry<T>) -> T {
    if !geom.los_clear {
        return T::zero();
    }
    params.radiance * params.source_area * params.absorption_eff
        / (geom.distance * geom.distance)
}

// ---------------------------------------------------------------------------
// RF beam
// ---------------------------------------------------------------------------

/// Parameters of an RF beam link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfParams<T: Real> {
    /// Receive aperture in m², > 0.
    receive_aperture: T,
    /// Transmit aperture in m², > 0.
    transmit_aperture: T,
    /// Carrier wavelength in metres, > 0.
    wavelength: T,
}

impl<T: Real> RfParams<T> {
    pub fn new(
        receive_aperture: T,
        transmit_aperture: T,
        wavelength: T,
    ) -> Result<Self, LinkModelError> {
        require(
            receive_aperture.is_finite() && receive_aperture > T::zero(),
            "receive_aperture",
            "must be finite and positive",
        )?;
        require(
            transmit_aperture.is_finite() && transmit_aperture > T::zero(),
            "transmit_aperture",
            "must be finite and positive",
        )?;
        require(
            wavelength.is_finite() && wavelength > T::zero(),
            "wavelength",
            "must be finite and positive",
        )?;
        Ok(Self {
            receive_aperture,
            transmit_aperture,
            wavelength,
        })
    }

    pub fn receive_aperture(&self) -> T {
        self.receive_aperture
    }

    pub fn transmit_aperture(&self) -> T {
        self.transmit_aperture
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }
}

/// Environmental efficiency with a clamp indicator.
///
/// `clamped` is true when the raw model value exceeded 1 and was limited —
/// for the RF model that means the far-field assumption is violated at this
/// distance; for the optical models it marks an over-unity raw gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvEfficiency<T: Real> {
    pub value: T,
    pub clamped: bool,
}

impl<T: Real> EnvEfficiency<T> {
    fn clamp_unit(raw: T) -> Self {
        if raw > T::one() {
            EnvEfficiency {
                value: T::one(),
                clamped: true,
            }
        } else {
            EnvEfficiency {
                value: raw.max(T::zero()),
                clamped: false,
            }
        }
    }

    fn zero() -> Self {
        EnvEfficiency {
            value: T::zero(),
            clamped: false,
        }
    }
}

/// Maximum aperture-to-aperture beam efficiency of an RF link:
/// `A_r * A_t / (d^2 * lambda^2)`, clamped to 1 (`clamped` set when the raw
/// value exceeds 1). Zero when the path is blocked.
pub fn rf_max_efficiency<T: Real>(params: &RfParams<T>, geom: &LinkGeometry<T>) -> EnvEfficiency<T> {
    if !geom.los_clear {
        return EnvEfficiency::zero();
    }
    let denom = (geom.distance * geom.distance) * (params.wavelength * params.wavelength);
    let raw = params.receive_aperture * params.transmit_aperture / denom;
    EnvEfficiency::clamp_unit(raw)
}

// ---------------------------------------------------------------------------
// Inductive near-field (IWPT)
// ---------------------------------------------------------------------------

/// Parameters of an inductive near-field link (coil pair with load).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwptParams<T: Real> {
    /// Primary/secondary self-inductances in henries, > 0.
    l1: T,
    l2: T,
    /// Mutual inductance in henries, `0 <= lm <= sqrt(l1*l2)`.
    lm: T,
    /// Winding resistances in ohms, > 0.
    r1: T,
    r2: T,
    /// Load resistance in ohms, > 0.
    r_load: T,
    /// Operating angular frequency in rad/s, > 0.
    omega: T,
}

impl<T: Real> IwptParams<T> {
    pub fn new(
        l1: T,
        l2: T,
        lm: T,
        r1: T,
        r2: T,
        r_load: T,
        omega: T,
    ) -> Result<Self, LinkModelError> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        require(pos(l1), "l1", "must be finite and positive")?;
        require(pos(l2), "l2", "must be finite and positive")?;
        require(pos(r1), "r1", "must be finite and positive")?;
        require(pos(r2), "r2", "must be finite and positive")?;
        require(pos(r_load), "r_load", "must be finite and positive")?;
        require(pos(omega), "omega", "must be finite and positive")?;
        require(
            lm.is_finite() && lm >= T::zero() && lm <= (l1 * l2).sqrt(),
            "lm",
            "must lie in [0, sqrt(l1*l2)]",
        )?;
        Ok(Self {
            l1,
            l2,
            lm,
            r1,
            r2,
            r_load,
            omega,
        })
    }

    /// Coupling coefficient `k = lm / sqrt(l1 * l2)`.
    pub fn coupling(&self) -> T {
        self.lm / (self.l1 * self.l2).sqrt()
    }

    /// Primary quality factor `Q1 = omega * l1 / r1`.
    pub fn primary_q(&self) -> T {
        self.omega * self.l1 / self.r1
    }

    /// Secondary quality factor `Q2 = omega * l2 / r2`.
    pub fn secondary_q(&self) -> T {
        self.omega * self.l2 / self.r2
    }

    pub fn r2(&self) -> T {
        self.r2
    }

    pub fn r_load(&self) -> T {
        self.r_load
    }
}

/// Inductive link efficiency at an explicit coupling coefficient:
/// `R_L / ((R2 + R_L)^2 / (k^2 Q1 Q2 R2) + R2 + R_L)`; 0 when `k <= 0`.
pub fn iwpt_efficiency_at<T: Real>(k: T, q1: T, q2: T, r2: T, r_load: T) -> T {
    if k <= T::zero() {
        return T::zero();
    }
    let sum = r2 + r_load;
    let reflected = sum * sum / (k * k * q1 * q2 * r2);
    r_load / (reflected + sum)
}

/// Inductive link efficiency using the coupling derived from the parameters'
/// mutual inductance.
pub fn iwpt_efficiency<T: Real>(params: &IwptParams<T>) -> T {
    iwpt_efficiency_at(
        params.coupling(),
        params.primary_q(),
        params.secondary_q(),
        params.r2,
        params.r_load,
    )
}

// ---------------------------------------------------------------------------
// Capacitive near-field (CWPT)
// ---------------------------------------------------------------------------

/// Parameters of a capacitive near-field link; the compensation topology
/// selects which maximum-efficiency expression applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CwptParams<T: Real> {
    /// Parallel compensation: equal-Q plate pair.
    Parallel { k: T, q: T },
    /// Series compensation: per-side quality factors.
    Series { k: T, q1: T, q2: T },
}

impl<T: Real> CwptParams<T> {
    pub fn parallel(k: T, q: T) -> Result<Self, LinkModelError> {
        require(
            k.is_finite() && k >= T::zero() && k <= T::one(),
            "k",
            "must lie in [0, 1]",
        )?;
        require(q.is_finite() && q > T::zero(), "q", "must be finite and positive")?;
        Ok(CwptParams::Parallel { k, q })
    }

    pub fn series(k: T, q1: T, q2: T) -> Result<Self, LinkModelError> {
        require(
            k.is_finite() && k >= T::zero() && k <= T::one(),
            "k",
            "must lie in [0, 1]",
        )?;
        require(q1.is_finite() && q1 > T::zero(), "q1", "must be finite and positive")?;
        require(q2.is_finite() && q2 > T::zero(), "q2", "must be finite and positive")?;
        Ok(CwptParams::Series { k, q1, q2 })
    }

    pub fn coupling(&self) -> T {
        match *self {
            CwptParams::Parallel { k, .. } => k,
            CwptParams::Series { k, .. } => k,
        }
    }

    /// Same parameters with the coupling coefficient replaced.
    pub fn with_coupling(&self, k: T) -> Self {
        match *self {
            CwptParams::Parallel { q, .. } => CwptParams::Parallel { k, q },
            CwptParams::Series { q1, q2, .. } => CwptParams::Series { k, q1, q2 },
        }
    }
}

/// Maximum efficiency of a parallel-compensated capacitive link:
/// `(sqrt(1 + (kQ)^2) - 1) / (sqrt(1 + (kQ)^2) + 1)`.
pub fn cwpt_parallel_max_eff<T: Real>(k: T, q: T) -> T {
    let kq = k * q;
    let s = (T::one() + kq * kq).sqrt();
    (s - T::one()) / (s + T::one())
}

/// Maximum efficiency of a series-compensated capacitive link:
/// `k^2 Q1 Q2 / (sqrt(1 + k^2 Q1 Q2) + 1)^2`.
pub fn cwpt_series_max_eff<T: Real>(k: T, q1: T, q2: T) -> T {
    let x = k * k * q1 * q2;
    let s = (T::one() + x).sqrt() + T::one();
    x / (s * s)
}

fn cwpt_efficiency<T: Real>(params: &CwptParams<T>) -> T {
    match *params {
        CwptParams::Parallel { k, q } => cwpt_parallel_max_eff(k, q),
        CwptParams::Series { k, q1, q2 } => cwpt_series_max_eff(k, q1, q2),
    }
}

// ---------------------------------------------------------------------------
// Technology dispatch
// ---------------------------------------------------------------------------

/// Discriminant of the five transfer technologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TechnologyKind {
    OwptLed,
    Laser,
    Rf,
    Iwpt,
    Cwpt,
}

impl TechnologyKind {
    pub const ALL: [TechnologyKind; 5] = [
        TechnologyKind::OwptLed,
        TechnologyKind::Laser,
        TechnologyKind::Rf,
        TechnologyKind::Iwpt,
        TechnologyKind::Cwpt,
    ];

    /// True for technologies whose coupling decays with distance through the
    /// engine coupling map rather than through an explicit distance term.
    pub fn is_near_field(self) -> bool {
        matches!(self, TechnologyKind::Iwpt | TechnologyKind::Cwpt)
    }

    /// True for technologies that require a clear line of sight.
    pub fn needs_line_of_sight(self) -> bool {
        !self.is_near_field()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TechnologyKind::OwptLed => "owpt_led",
            TechnologyKind::Laser => "laser",
            TechnologyKind::Rf => "rf",
            TechnologyKind::Iwpt => "iwpt",
            TechnologyKind::Cwpt => "cwpt",
        }
    }
}

impl fmt::Display for TechnologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TechnologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "owpt_led" => Ok(TechnologyKind::OwptLed),
            "laser" => Ok(TechnologyKind::Laser),
            "rf" => Ok(TechnologyKind::Rf),
            "iwpt" => Ok(TechnologyKind::Iwpt),
            "cwpt" => Ok(TechnologyKind::Cwpt),
            other => Err(format!("unknown technology kind: {other}")),
        }
    }
}

/// Parameter record of one link technology.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkTechnologyParams<T: Real> {
    OwptLed(OwptLedParams<T>),
    Laser(LaserParams<T>),
    Rf(RfParams<T>),
    Iwpt(IwptParams<T>),
    Cwpt(CwptParams<T>),
}

impl<T: Real> LinkTechnologyParams<T> {
    pub fn kind(&self) -> TechnologyKind {
        match self {
            LinkTechnologyParams::OwptLed(_) => TechnologyKind::OwptLed,
            LinkTechnologyParams::Laser(_) => TechnologyKind::Laser,
            LinkTechnologyParams::Rf(_) => TechnologyKind::Rf,
            LinkTechnologyParams::Iwpt(_) => TechnologyKind::Iwpt,
            LinkTechnologyParams::Cwpt(_) => TechnologyKind::Cwpt,
        }
    }
}

/// Environmental efficiency of the selected technology at the given geometry,
/// clamped to `[0, 1]`.
///
/// Line-of-sight technologies (LED, laser, RF) return 0 when the path is
/// blocked; the near-field technologies ignore `los_clear` and use the
/// coupling implied by their parameters.
pub fn link_env_efficiency<T: Real>(
    tech: &LinkTechnologyParams<T>,
    geom: &LinkGeometry<T>,
) -> EnvEfficiency<T> {
    link_env_efficiency_with_coupling(tech, geom, None)
}

/// [`link_env_efficiency`] with an optional coupling override for the
/// near-field technologies (supplied by the engine's distance→coupling map);
/// the override is ignored by the far-field technologies.
pub fn link_env_efficiency_with_coupling<T: Real>(
    tech: &LinkTechnologyParams<T>,
    geom: &LinkGeometry<T>,
    coupling: Option<T>,
) -> EnvEfficiency<T> {
    match tech {
        LinkTechnologyParams::OwptLed(p) => EnvEfficiency::clamp_unit(owpt_dc_gain(p, geom)),
        LinkTechnologyParams::Laser(p) => EnvEfficiency::clamp_unit(laser_received_flux(p, geom)),
        LinkTechnologyParams::Rf(p) => rf_max_efficiency(p, geom),
        LinkTechnologyParams::Iwpt(p) => {
            let k = coupling.unwrap_or_else(|| p.coupling());
            EnvEfficiency {
                value: iwpt_efficiency_at(k, p.primary_q(), p.secondary_q(), p.r2, p.r_load),
                clamped: false,
            }
        }
        LinkTechnologyParams::Cwpt(p) => {
            let effective = match coupling {
                Some(k) => p.with_coupling(k),
                None => *p,
            };
            EnvEfficiency {
                value: cwpt_efficiency(&effective),
                clamped: false,
            }
        }
    }
}

// ---------------------------------------------------------------------------
