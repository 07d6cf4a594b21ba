//! Hybrid on-board energy store: a battery for capacity and a
//! supercapacitor for power. Charge is routed supercap-first so the fast
//! buffer absorbs high transfer power, a configurable trickle consolidates
//! buffered energy into the battery, and discharge also drains the supercap
//! first. All energies are watt-hours, powers are watts, intervals are
//! seconds.

use crate::real::Real;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Validation failure for a storage parameter set.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StorageError {
    #[error("reservoir parameter {name} invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
}

fn require(ok: bool, name: &'static str, reason: &'static str) -> Result<(), StorageError> {
    if ok {
        Ok(())
    } else {
        Err(StorageError::InvalidParameter { name, reason })
    }
}

/// One energy reservoir (battery or supercapacitor).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservoir<T: Real> {
    /// Usable capacity in Wh (> 0).
    capacity_wh: T,
    /// Current state of charge in Wh, within `[0, capacity_wh]`.
    soc_wh: T,
    /// Terminal charge power limit in W (> 0).
    max_charge_w: T,
    /// Terminal discharge power limit in W (> 0).
    max_discharge_w: T,
    /// Conversion efficiency applied to incoming energy, in `[0, 1]`.
    in_efficiency: T,
    /// Conversion efficiency applied to outgoing energy, in `[0, 1]`.
    out_efficiency: T,
}

/// Energy accepted by a reservoir or store during one charge interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeOutcome<T: Real> {
    /// New energy added to states of charge, Wh.
    pub accepted_wh: T,
    /// Conversion (and trickle) losses, Wh.
    pub loss_wh: T,
    /// Offered energy that was not taken, Wh.
    pub rejected_wh: T,
}

/// Energy delivered by a reservoir or store during one discharge interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DischargeOutcome<T: Real> {
    /// Energy delivered at the terminals, Wh.
    pub delivered_wh: T,
    /// Conversion losses (state-of-charge drain minus delivered), Wh.
    pub loss_wh: T,
}

impl<T: Real> Reservoir<T> {
    pub fn new(
        capacity_wh: T,
        soc_wh: T,
        max_charge_w: T,
        max_discharge_w: T,
        in_efficiency: T,
        out_efficiency: T,
    ) -> Result<Self, StorageError> {
        let pos = |v: T| v.is_finite() && v > T::zero();
        let unit = |v: T| v.is_finite() && v >= T::zero() && v <= T::one();
        require(pos(capacity_wh), "capacity_wh", "must be finite and positive")?;
        require(
            soc_wh.is_finite() && soc_wh >= T::zero() && soc_wh <= capacity_wh,
            "soc_wh",
            "must lie in [0, capacity_wh]",
        )?;
        require(pos(max_charge_w), "max_charge_w", "must be finite and positive")?;
        require(
            pos(max_discharge_w),
            "max_discharge_w",
            "must be finite and positive",
        )?;
        require(unit(in_efficiency), "in_efficiency", "must lie in [0, 1]")?;
        require(unit(out_efficiency), "out_efficiency", "must lie in [0, 1]")?;
        Ok(Self {
            capacity_wh,
            soc_wh,
            max_charge_w,
            max_discharge_w,
            in_efficiency,
            out_efficiency,
        })
    }

    pub fn capacity_wh(&self) -> T {
        self.capacity_wh
    }

    pub fn soc_wh(&self) -> T {
        self.soc_wh
    }

    pub fn max_charge_w(&self) -> T {
        self.max_charge_w
    }

    pub fn max_discharge_w(&self) -> T {
        self.max_discharge_w
    }

    pub fn headroom_wh(&self) -> T {
        self.capacity_wh - self.soc_wh
    }

    fn hours(dt_s: T) -> T {
        dt_s / T::lit(SECONDS_PER_HOUR)
    }

    /// Charges from `offered_w` for `dt_s`, respecting the power limit,
    /// headroom and inbound efficiency. Returns the terminal energy taken
    /// (the offered share that entered the converter), the state-of-charge
    /// gain and the conversion loss.
    fn charge(&mut self, offered_w: T, dt_s: T) -> ChargeOutcome<T> {
        let offered_wh = offered_w * Self::hours(dt_s);
        if offered_w <= T::zero() || self.in_efficiency == T::zero() {
            // A dead converter takes nothing rather than burning everything.
            return ChargeOutcome {
                accepted_wh: T::zero(),
                loss_wh: T::zero(),
                rejected_wh: offered_wh.max(T::zero()),
            };
        }
        let power_limited_wh = offered_w.min(self.max_charge_w) * Self::hours(dt_s);
        let headroom_limited_wh = self.headroom_wh() / self.in_efficiency;
        let terminal_wh = power_limited_wh.min(headroom_limited_wh);
        let gained_wh = terminal_wh * self.in_efficiency;
        self.soc_wh = (self.soc_wh + gained_wh).min(self.capacity_wh);
        ChargeOutcome {
            accepted_wh: gained_wh,
            loss_wh: terminal_wh - gained_wh,
            rejected_wh: offered_wh - terminal_wh,
        }
    }

    /// Discharges toward `requested_w` for `dt_s`, respecting the power
    /// limit, available charge and outbound efficiency.
    fn discharge(&mut self, requested_w: T, dt_s: T) -> DischargeOutcome<T> {
        if requested_w <= T::zero() || self.out_efficiency == T::zero() {
            return DischargeOutcome {
                delivered_wh: T::zero(),
                loss_wh: T::zero(),
            };
        }
        let power_limited_wh = requested_w.min(self.max_discharge_w) * Self::hours(dt_s);
        let deliverable_wh = self.soc_wh * self.out_efficiency;
        let delivered_wh = power_limited_wh.min(deliverable_wh);
        let drained_wh = delivered_wh / self.out_efficiency;
        self.soc_wh = (self.soc_wh - drained_wh).max(T::zero());
        DischargeOutcome {
            delivered_wh,
            loss_wh: drained_wh - delivered_wh,
        }
    }

    /// Terminal energy this reservoir could deliver during `dt_s`, Wh.
    fn deliverable_wh(&self, dt_s: T) -> T {
        (self.max_discharge_w * Self::hours(dt_s)).min(self.soc_wh * self.out_efficiency)
    }
}

/// Battery + supercapacitor pair with supercap-first routing in both
/// directions and a background supercap→battery trickle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridStore<T: Real> {
    pub battery: Reservoir<T>,
    pub supercap: Reservoir<T>,
    /// Steady internal consolidation rate from supercap to battery, W (>= 0).
    trickle_power_w: T,
}

impl<T: Real> HybridStore<T> {
    pub fn new(
        battery: Reservoir<T>,
        supercap: Reservoir<T>,
        trickle_power_w: T,
    ) -> Result<Self, StorageError> {
        require(
            trickle_power_w.is_finite() && trickle_power_w >= T::zero(),
            "trickle_power_w",
            "must be finite and non-negative",
        )?;
        Ok(Self {
            battery,
            supercap,
            trickle_power_w,
        })
    }

    /// Total state of charge across both reservoirs, Wh.
    pub fn total_soc_wh(&self) -> T {
        self.battery.soc_wh + self.supercap.soc_wh
    }

    /// Terminal power the store can currently deliver for an interval of
    /// `dt_s`, W.
    pub fn dischargeable_power_w(&self, dt_s: T) -> T {
        let wh = self.supercap.deliverable_wh(dt_s) + self.battery.deliverable_wh(dt_s);
        wh * T::lit(SECONDS_PER_HOUR) / dt_s
    }

    /// Moves up to `trickle_power_w * dt_s` of charge from the supercap into
    /// the battery, bounded by the supercap's available charge, the
    /// battery's headroom and both reservoirs' power limits. The battery's
    /// inbound efficiency applies; the loss is returned.
    pub fn trickle(&mut self, dt_s: T) -> T {
        if self.trickle_power_w <= T::zero() || self.battery.in_efficiency == T::zero() {
            return T::zero();
        }
        let hours = Reservoir::<T>::hours(dt_s);
        let rate_w = self
            .trickle_power_w
            .min(self.supercap.max_discharge_w)
            .min(self.battery.max_charge_w);
        let moved_wh = (rate_w * hours)
            .min(self.supercap.soc_wh)
            .min(self.battery.headroom_wh());
        if moved_wh <= T::zero() {
            return T::zero();
        }
        let gained_wh = moved_wh * self.battery.in_efficiency;
        self.supercap.soc_wh -= moved_wh;
        self.battery.soc_wh = (self.battery.soc_wh + gained_wh).min(self.battery.capacity_wh);
        moved_wh - gained_wh
    }

    /// Accepts `offered_w` of charging power for `dt_s`.
    ///
    /// The trickle step runs first (it is part of every charging interval;
    /// with `offered_w = 0` the store is unchanged except for that step),
    /// then the offered power is routed supercap-first with the remainder to
    /// the battery. Power not taken by either reservoir is rejected, not
    /// lost.
    pub fn accept_charge(&mut self, offered_w: T, dt_s: T) -> ChargeOutcome<T> {
        let trickle_loss = self.trickle(dt_s);
        let offered = offered_w.max(T::zero());
        let sc = self.supercap.charge(offered, dt_s);
        let hours = Reservoir::<T>::hours(dt_s);
        let remaining_w = sc.rejected_wh / hours;
        let bat = self.battery.charge(remaining_w, dt_s);
        ChargeOutcome {
            accepted_wh: sc.accepted_wh + bat.accepted_wh,
            loss_wh: sc.loss_wh + bat.loss_wh + trickle_loss,
            rejected_wh: bat.rejected_wh,
        }
    }

    /// Delivers up to `requested_w` of terminal power for `dt_s`, draining
    /// the supercap first and topping up from the battery.
    pub fn provide_discharge(&mut self, requested_w: T, dt_s: T) -> DischargeOutcome<T> {
        let requested = requested_w.max(T::zero());
        let hours = Reservoir::<T>::hours(dt_s);
        let sc = self.supercap.discharge(requested, dt_s);
        let remaining_w = (requested * hours - sc.delivered_wh).max(T::zero()) / hours;
        let bat = self.battery.discharge(remaining_w, dt_s);
        DischargeOutcome {
            delivered_wh: sc.delivered_wh + bat.delivered_wh,
            loss_wh: sc.loss_wh + bat.loss_wh,
        }
    }
}
