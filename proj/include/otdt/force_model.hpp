#pragma once

// Piecewise optical-trap force surrogate and its aggregation over a rigid
// assembly of spherical trapping elements.
//
// Near the trap the restoring force grows linearly (stiffness K); beyond the
// transition distance delta it follows C + A / r^2 until the capture cutoff,
// past which the trap exerts nothing. The force always points from the
// element toward the trap focus.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otdt/error.hpp"
#include "otdt/vec3.hpp"

namespace otdt {

struct OpticalForceParams {
    double stiffness_k = 0.0;  ///< pN/µm
    double delta = 0.0;        ///< µm, near/far transition
    double far_a = 0.0;        ///< pN·µm²
    double far_c = 0.0;        ///< pN
    double cutoff_r_max = 0.0; ///< µm, capture range

    friend bool operator==(const OpticalForceParams&, const OpticalForceParams&) = default;

    /// Magnitude mismatch of the two branches at delta.
    double continuity_gap() const {
        return std::abs(far_c + far_a / (delta * delta) - stiffness_k * delta);
    }

    /// Throws ParameterError naming the first violated invariant.
    void validate() const {
        const bool finite = std::isfinite(stiffness_k) && std::isfinite(delta) &&
                            std::isfinite(far_a) && std::isfinite(far_c) &&
                            std::isfinite(cutoff_r_max);
        if (!finite) throw ParameterError("force params must be finite");
        if (!(stiffness_k > 0.0)) throw ParameterError("stiffness K must be > 0");
        if (!(delta > 0.0)) throw ParameterError("delta must be > 0");
        if (!(cutoff_r_max > delta)) throw ParameterError("cutoff r_max must exceed delta");
        const double scale = stiffness_k * delta;
        if (continuity_gap() > 1e-9 * scale)
            throw ParameterError("branches discontinuous at delta: |C + A/delta^2 - K*delta| = " +
                                 std::to_string(continuity_gap()));
        // far branch is monotone in r, so checking the cutoff end suffices
        if (far_c + far_a / (cutoff_r_max * cutoff_r_max) < -1e-9 * scale)
            throw ParameterError("far branch turns repulsive before r_max");
    }
};

struct Trap {
    Vec3 position;
    double power_weight = 1.0;  ///< 1.0 = nominal beam power

    friend bool operator==(const Trap&, const Trap&) = default;
};

struct SphereElement {
    Vec3 offset_body;                        ///< µm, body frame
    double radius = 1.0;                     ///< µm
    std::optional<std::size_t> assigned_trap;

    friend bool operator==(const SphereElement&, const SphereElement&) = default;
};

struct ForceSample {
    double displacement_r = 0.0; ///< µm
    double force_magnitude = 0.0; ///< pN

    friend bool operator==(const ForceSample&, const ForceSample&) = default;
};

struct Pose {
    Vec3 position;
    Quat orientation;

    friend bool operator==(const Pose&, const Pose&) = default;

    Vec3 to_world(const Vec3& body_offset) const {
        return position + orientation.rotate(body_offset);
    }
};

/// Gaussian-beam gradient-force profile used as the reference force source.
struct ReferenceProfile {
    double f_max = 6.0;       ///< pN, peak force
    double beam_waist = 0.8;  ///< µm, location of the peak
};

struct MsdmWrench {
    Vec3 net_force;
    Vec3 net_torque;              ///< about the pose position
    std::vector<Vec3> per_element;
};

namespace detail {

inline double magnitude_unchecked(const OpticalForceParams& p, double r) {
    if (r < p.delta) return p.stiffness_k * r;
    if (r < p.cutoff_r_max) return p.far_c + p.far_a / (r * r);
    return 0.0;
}

inline Vec3 trap_force_unchecked(const OpticalForceParams& p, const Trap& trap, const Vec3& point) {
    const Vec3 toward = trap.position - point;
    const double r = norm(toward);
    if (r == 0.0) return {};
    return toward * (trap.power_weight * magnitude_unchecked(p, r) / r);
}

inline void check_weight(const Trap& trap) {
    if (!std::isfinite(trap.power_weight) || trap.power_weight < 0.0)
        throw ParameterError("trap power_weight must be finite and >= 0");
}

}  // namespace detail

/// Unweighted force magnitude at radial distance r (pN).
inline double force_magnitude(const OpticalForceParams& params, double r) {
    params.validate();
    return detail::magnitude_unchecked(params, r);
}

/// Force on a point from one trap. Zero at the focus and beyond the cutoff.
inline Vec3 eval_trap_force(const OpticalForceParams& params, const Trap& trap, const Vec3& point) {
    params.validate();
    detail::check_weight(trap);
    return detail::trap_force_unchecked(params, trap, point);
}

/// Gaussian-beam reference force F(r) = F_max (r/w) exp(1/2 - r^2 / (2 w^2)).
inline std::vector<ForceSample> sample_reference_force(const ReferenceProfile& profile,
                                                       std::span<const double> displacements) {
    if (!(profile.f_max > 0.0) || !(profile.beam_waist > 0.0))
        throw ParameterError("reference profile needs F_max > 0 and w > 0");
    std::vector<ForceSample> out;
    out.reserve(displacements.size());
    const double w = profile.beam_waist;
    for (double r : displacements) {
        if (!(r >= 0.0)) throw ParameterError("displacement must be >= 0");
        out.push_back({r, profile.f_max * (r / w) * std::exp(0.5 - r * r / (2.0 * w * w))});
    }
    return out;
}

/// `n` evenly spaced displacements on [lo, hi], endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

struct FitOptions {
    std::optional<double> cutoff_r_max;  ///< defaults to the largest sampled displacement
};

/// Root-mean-square magnitude residual of `params` over `samples`.
inline double fit_rmse(const OpticalForceParams& params, std::span<const ForceSample> samples) {
    if (samples.empty()) return 0.0;
    double sse = 0.0;
    for (const auto& s : samples) {
        const double e = detail::magnitude_unchecked(params, s.displacement_r) - s.force_magnitude;
        sse += e * e;
    }
    return std::sqrt(sse / static_cast<double>(samples.size()));
}

/// Least-squares fit of the piecewise surrogate with continuity enforced at delta.
///
/// Every sampled displacement is tried as the breakpoint. For each candidate,
/// K comes from a through-origin least-squares fit of the samples below it and
/// A from the samples at or above it with C eliminated by the continuity
/// constraint C = K*delta - A/delta^2. The candidate with the smallest total
/// squared residual wins; ties keep the smaller delta.
inline OpticalForceParams fit_piecewise(std::span<const ForceSample> samples,
                                        const FitOptions& options = {}) {
    if (samples.size() < 8)
        throw FitError("too few samples: need at least 8, got " + std::to_string(samples.size()));

    std::vector<ForceSample> sorted(samples.begin(), samples.end());
    for (const auto& s : sorted) {
        if (!(s.displacement_r >= 0.0) || !std::isfinite(s.displacement_r) ||
            !std::isfinite(s.force_magnitude))
            throw FitError("samples must be finite with displacement >= 0");
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const ForceSample& a, const ForceSample& b) { return a.displacement_r < b.displacement_r; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].displacement_r == sorted[i - 1].displacement_r)
            throw FitError("sample displacements must be distinct");

    const std::size_t n = sorted.size();
    // prefix sums for the near-field fit: sum r*f, sum r^2, sum f^2
    std::vector<double> srf(n + 1, 0.0), srr(n + 1, 0.0), sff(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = sorted[i];
        srf[i + 1] = srf[i] + s.displacement_r * s.force_magnitude;
        srr[i + 1] = srr[i] + s.displacement_r * s.displacement_r;
        sff[i + 1] = sff[i] + s.force_magnitude * s.force_magnitude;
    }

    std::optional<OpticalForceParams> best;
    double best_sse = 0.0;
    bool had_split = false;
    bool had_far_rank = false;

    for (std::size_t j = 2; j + 2 <= n; ++j) {
        // near = [0, j), far = [j, n)
        const double delta = sorted[j].displacement_r;
        if (srr[j] <= 0.0) continue;
        had_split = true;
        const double k = srf[j] / srr[j];
        if (!(k > 0.0)) continue;

        const double inv_d2 = 1.0 / (delta * delta);
        const double anchor = k * delta;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = j; i < n; ++i) {
            const double r = sorted[i].displacement_r;
            const double x = 1.0 / (r * r) - inv_d2;
            sxx += x * x;
            sxy += x * (sorted[i].force_magnitude - anchor);
        }
        if (!(sxx > 1e-300)) continue;
        had_far_rank = true;
        const double a = sxy / sxx;
        const double c = anchor - a * inv_d2;

        // near residual from prefix sums: sum (f - k r)^2
        double sse = sff[j] - 2.0 * k * srf[j] + k * k * srr[j];
        for (std::size_t i = j; i < n; ++i) {
            const double r = sorted[i].displacement_r;
            const double e = c + a / (r * r) - sorted[i].force_magnitude;
            sse += e * e;
        }
        if (!best || sse < best_sse) {
            best = OpticalForceParams{k, delta, a, c, 0.0};
            best_sse = sse;
        }
    }

    if (!had_split) throw FitError("degenerate samples: no breakpoint leaves samples on both sides");
    if (!had_far_rank) throw FitError("rank-deficient far-field fit");
    if (!best) throw FitError("degenerate samples: no breakpoint yields positive stiffness");

    OpticalForceParams p = *best;
    p.cutoff_r_max = options.cutoff_r_max.value_or(sorted.back().displacement_r);
    if (!(p.cutoff_r_max > p.delta)) throw FitError("cutoff r_max must exceed the fitted delta");
    if (p.far_c < 0.0 && p.far_a > 0.0) {
        // a negative asymptote would turn the trap repulsive past the zero crossing
        const double zero_crossing = std::sqrt(-p.far_a / p.far_c);
        p.cutoff_r_max = std::min(p.cutoff_r_max, zero_crossing);
    }
    p.validate();
    return p;
}

/// Net optical force and torque on a rigid assembly of trapping elements.
inline MsdmWrench msdm_wrench(const OpticalForceParams& params, std::span<const Trap> traps,
                              const Pose& pose, std::span<const SphereElement> elements) {
    params.validate();
    for (const auto& t : traps) detail::check_weight(t);
    MsdmWrench out;
    out.per_element.reserve(elements.size());
    for (std::size_t i = 0; i < elements.size(); ++i) {
        const auto& e = elements[i];
        Vec3 f;
        if (e.assigned_trap) {
            if (*e.assigned_trap >= traps.size())
                throw ParameterError("element " + std::to_string(i) + " assigned to trap " +
                                     std::to_string(*e.assigned_trap) + " but only " +
                                     std::to_string(traps.size()) + " traps exist");
            const Vec3 arm = pose.orientation.rotate(e.offset_body);
            f = detail::trap_force_unchecked(params, traps[*e.assigned_trap], pose.position + arm);
            out.net_torque += cross(arm, f);
        }
        out.net_force += f;
        out.per_element.push_back(f);
    }
    return out;
}

}  // namespace otdt
