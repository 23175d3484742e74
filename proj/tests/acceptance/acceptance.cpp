// Acceptance run: one PASS/FAIL line per primary criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "otdt/experiments.hpp"
#include "otdt/server.hpp"
#include "support/golden_client.hpp"

using namespace otdt;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario shipped(const char* name) {
    return load_scenario_file(std::filesystem::path(OTDT_SCENARIO_DIR) / name);
}

Verdict force_properties() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> uk(0.5, 20), ud(0.2, 2.0), ua(-5, 10), ur(1.1, 4.0), u01(0, 1), uw(0, 3);
    double worst_gap = 0;
    int failures = 0, sets = 0;
    while (sets < 1000) {
        OpticalForceParams p;
        p.stiffness_k = uk(gen);
        p.delta = ud(gen);
        p.far_a = ua(gen);
        p.cutoff_r_max = p.delta * ur(gen);
        p.far_c = p.stiffness_k * p.delta - p.far_a / (p.delta * p.delta);
        if (p.far_c + p.far_a / (p.cutoff_r_max * p.cutoff_r_max) < 0) continue;
        ++sets;
        p.validate();

        const double below = force_magnitude(p, std::nextafter(p.delta, 0.0));
        const double at = force_magnitude(p, p.delta);
        worst_gap = std::max(worst_gap, std::abs(at - below));
        if (std::abs(at - below) > 1e-6) ++failures;

        double prev = -1;
        for (int i = 0; i <= 100; ++i) {
            const double f = force_magnitude(p, p.delta * i / 100.0);
            if (f < prev) ++failures;
            prev = f;
        }

        const Trap trap{{u01(gen), u01(gen), u01(gen)}, 1.0};
        for (int i = 0; i < 20; ++i) {
            Vec3 dir{u01(gen) - 0.5, u01(gen) - 0.5, u01(gen) - 0.5};
            dir = dir / norm(dir);
            const Vec3 point = trap.position + dir * (p.cutoff_r_max * (0.001 + 0.998 * u01(gen)));
            const Vec3 f = eval_trap_force(p, trap, point);
            if (!(dot(f, trap.position - point) > 0)) ++failures;
            const double w = uw(gen);
            const Vec3 fw = eval_trap_force(p, Trap{trap.position, w}, point);
            if (norm(fw - w * f) > 1e-12 * (1 + norm(fw))) ++failures;
        }
    }
    const double secs = seconds_since(t0);
    return {failures == 0 && worst_gap <= 1e-6 && secs < 5.0,
            fmt("%d sets, %d violations, max continuity gap %.2e pN, %.2f s", sets, failures, worst_gap, secs)};
}

Verdict fit_recovery() {
    const OpticalForceParams truth{5.0, 1.0, 2.0, 3.0, 4.0};
    std::vector<ForceSample> samples;
    for (int i = 1; i <= 30; ++i) {
        const double r = i / 10.0;
        samples.push_back({r, r < truth.delta ? truth.stiffness_k * r : truth.far_c + truth.far_a / (r * r)});
    }
    const auto fit = fit_piecewise(samples);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
    const double worst = std::max({rel(fit.stiffness_k, truth.stiffness_k), rel(fit.delta, truth.delta),
                                   rel(fit.far_a, truth.far_a), rel(fit.far_c, truth.far_c)});

    const ReferenceProfile prof{6.0, 0.8};
    const auto ref = sample_reference_force(prof, linspace(0.0, 4.0 * prof.beam_waist, 200));
    const auto gauss = fit_piecewise(ref);
    double ss = 0;
    for (const auto& s : ref) ss += std::pow(force_magnitude(gauss, s.displacement_r) - s.force_magnitude, 2);
    const double rmse_frac = std::sqrt(ss / static_cast<double>(ref.size())) / prof.f_max;

    return {worst <= 1e-6 && rmse_frac <= 0.05,
            fmt("recovery max rel err %.2e (<= 1e-6); Gaussian RMSE %.2f%% of F_max (<= 5%%)", worst,
                100 * rmse_frac)};
}

Verdict fluctuation_dissipation() {
    const auto t0 = std::chrono::steady_clock::now();
    World w;
    w.robot.elements = {{{}, 1.5, std::nullopt}};
    const Medium water;
    CounterRng rng(2024);
    const int steps = 100000, lag = 100;
    const double dt = 1e-3;
    std::vector<Vec3> path{w.robot.pose.position};
    path.reserve(steps + 1);
    for (int i = 0; i < steps; ++i) {
        w = step(w, {}, {5, 1, 2, 3, 4}, water, dt, rng).next;
        path.push_back(w.robot.pose.position);
    }
    double msd = 0;
    for (int i = 0; i + lag <= steps; ++i) msd += norm2(path[i + lag] - path[i]);
    msd /= steps - lag + 1;
    const double d = diffusion_coefficient(stokes_drag(1.5, water), water);
    const double ratio = msd / (6 * d * lag * dt);
    const double secs = seconds_since(t0);
    return {std::abs(ratio - 1) <= 0.10 && std::abs(d - 0.1465) < 1e-3 && secs < 30,
            fmt("D %.5f um^2/s, MSD/(6Dt) at t=0.1 s = %.4f (within 10%%), %.2f s", d, ratio, secs)};
}

Verdict filter_exactness() {
    LowPassState s;
    double worst = 0;
    for (int k = 1; k <= 2000; ++k) {
        const auto r = lowpass_step(s, {1, 1, 1}, 0.05);
        s = r.state;
        worst = std::max(worst, std::abs(r.y.x - (1 - std::pow(0.95, k))));
    }
    return {worst <= 1e-14, fmt("max |y_k - (1-(1-a)^k)| = %.2e over 2000 steps", worst)};
}

Verdict rendering_consistency() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = run_consistency_study(ConsistencyConfig{});
    double identity = 0;
    for (const auto& s : res.samples)
        if (s.mode == "steady") identity = std::max(identity, std::abs(s.rendered - s.model));
    const double secs = seconds_since(t0);
    return {res.radial.r2 >= 0.95 && res.axial.r2 >= 0.95 && identity <= 1e-6 && secs < 10,
            fmt("R2 radial %.4f axial %.4f; damping-off identity %.2e pN; %.2f s", res.radial.r2, res.axial.r2,
                identity, secs)};
}

Verdict strategy_a_trend() {
    RotationStudyConfig cfg;
    const auto rows = run_rotation_study(cfg);
    std::vector<double> d, th;
    std::string pts;
    for (const auto& r : rows) {
        d.push_back(r.d_star);
        th.push_back(r.theta_deg);
        pts += fmt(" %.2f", r.theta_deg);
    }
    const double rho = spearman(d, th);
    return {rows.size() >= 5 && rho <= -0.9, fmt("Spearman %.3f over %zu points; theta deg:%s", rho, rows.size(), pts.c_str())};
}

Verdict strategy_b_equivalence() {
    RotationStudyConfig a, b1, b15;
    b1.strategy = b15.strategy = Strategy::B;
    b1.power_ratio_m = 1.0;
    double worst = 0;
    for (double d : a.d_star_values)
        worst = std::max(worst, std::abs(run_rotation_point(a, d).theta_deg - run_rotation_point(b1, d).theta_deg));
    bool converged = true;
    for (const auto& r : run_rotation_study(b15)) converged = converged && r.converged && std::isfinite(r.theta_deg);
    return {worst <= 1e-6 && converged,
            fmt("m=1 vs A max |dtheta| %.2e deg; m=1.5 all converged: %s", worst, converged ? "yes" : "no")};
}

Verdict delivery_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    DeliveryConfig cfg{shipped("delivery.json")};
    const auto res = run_delivery_study(cfg);
    const auto& b = res.blind.summary.contact_force;
    const auto& a = res.aware.summary.contact_force;
    const double secs = seconds_since(t0);
    return {a.mean < b.mean && a.sd < b.sd && secs < 120,
            fmt("blind %.3f +/- %.3f pN, aware %.3f +/- %.3f pN (SD -%.1f%%); success %.0f%% / %.0f%%; %.2f s", b.mean,
                b.sd, a.mean, a.sd, 100 * res.force_sd_reduction, 100 * res.blind.summary.success_rate,
                100 * res.aware.summary.success_rate, secs)};
}

Verdict replay_determinism() {
    const std::vector<Scenario> bases{shipped("minimal.json"), shipped("delivery.json")};
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u01(0, 1), uv(-1.5, 1.5);
    int identical = 0;
    std::vector<std::string> reasons;
    for (int i = 0; i < 100; ++i) {
        Scenario s = bases[static_cast<std::size_t>(i) % bases.size()];
        s.seed = gen();
        s.timeout = 0.2 + 0.6 * u01(gen);
        std::vector<ScriptedInput::Step> steps;
        const int n = 1 + static_cast<int>(8 * u01(gen));
        for (int k = 0; k < n; ++k) {
            const double t = s.timeout * u01(gen);
            const Device d = u01(gen) < 0.5 ? Device::left : Device::right;
            steps.push_back({t, HandInput{d, {uv(gen), uv(gen), 0.3 * uv(gen)}, t}});
        }
        std::optional<double> close_after;
        const double ending = u01(gen);
        if (ending < 0.15) steps.push_back({s.timeout * u01(gen), ControlMessage{"abort"}});
        else if (ending < 0.3) close_after = s.timeout * u01(gen);
        ScriptedInput in(steps, close_after);
        VirtualClock clock;
        const auto log = run_session(s, in, clock);
        if (serialize_log(replay(log, s)) == serialize_log(log)) ++identical;
    }
    return {identical == 100, fmt("%d/100 randomized sessions replayed byte-identically", identical)};
}

Verdict protocol_golden() {
    Server server(otdt::testing::golden_server_options());
    const auto lines = otdt::testing::run_golden_script(server.start());
    const auto golden = otdt::testing::read_lines(otdt::testing::golden_path());
    std::size_t first_diff = 0;
    while (first_diff < lines.size() && first_diff < golden.size() && lines[first_diff] == golden[first_diff])
        ++first_diff;
    const bool same = !golden.empty() && lines == golden;
    return {same, same ? fmt("%zu lines match", lines.size())
                       : fmt("mismatch at line %zu (got %zu lines, golden %zu)", first_diff + 1, lines.size(),
                             golden.size())};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Verdict()>> criteria[] = {
        {"force-model properties", force_properties},
        {"fit recovery", fit_recovery},
        {"fluctuation-dissipation", fluctuation_dissipation},
        {"filter exactness", filter_exactness},
        {"rendering consistency", rendering_consistency},
        {"strategy A trend", strategy_a_trend},
        {"strategy B equivalence", strategy_b_equivalence},
        {"delivery-study direction", delivery_direction},
        {"replay determinism", replay_determinism},
        {"protocol golden", protocol_golden},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
    return failed == 0 ? 0 : 1;
}
