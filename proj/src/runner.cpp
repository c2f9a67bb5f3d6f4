#include "katolab/runner.hpp"

#include "katolab/carleson_tb.hpp"
#include "katolab/fft.hpp"
#include "katolab/functional.hpp"
#include "katolab/report.hpp"
#include "katolab/rng.hpp"
#include "katolab/semigroup.hpp"
#include "katolab/squarefunc.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace katolab {

namespace {

using njson = nlohmann::ordered_json;

[[noreturn]] void bad_config(const std::string& field, const std::string& why) {
    throw std::invalid_argument("config." + field + ": " + why);
}

double get_num(const njson& j, const std::string& ctx, const std::string& key, double dflt,
               bool required = false) {
    if (!j.contains(key)) {
        if (required) bad_config(ctx + "." + key, "missing required field");
        return dflt;
    }
    if (!j[key].is_number()) bad_config(ctx + "." + key, "must be a number");
    return j[key].get<double>();
}

std::string get_str(const njson& j, const std::string& ctx, const std::string& key,
                    const std::string& dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_string()) bad_config(ctx + "." + key, "must be a string");
    return j[key].get<std::string>();
}

const std::set<std::string> kWeightFamilies{"constant", "power", "two_valued", "smooth"};
const std::set<std::string> kFieldFamilies{"identity", "real_symmetric",
                                           "complex_perturbation"};
const std::vector<std::string> kSuites{"kato", "gaussfit", "squarefunc", "carleson", "tb"};

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    njson j;
    try {
        j = njson::parse(text);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    ExperimentConfig c;

    if (!j.contains("grid") || !j["grid"].is_object()) bad_config("grid", "missing object");
    const auto& jg = j["grid"];
    c.grid.dim = static_cast<int>(get_num(jg, "grid", "dim", 1));
    if (c.grid.dim != 1 && c.grid.dim != 2) bad_config("grid.dim", "must be 1 or 2");
    c.grid.side = get_num(jg, "grid", "side", 1.0);
    if (!(c.grid.side > 0)) bad_config("grid.side", "must be positive");
    if (!jg.contains("m_list") || !jg["m_list"].is_array() || jg["m_list"].empty())
        bad_config("grid.m_list", "must be a nonempty array");
    c.grid.m_list.clear();
    for (const auto& v : jg["m_list"]) {
        if (!v.is_number_integer()) bad_config("grid.m_list", "entries must be integers");
        c.grid.m_list.push_back(v.get<int>());
    }
    for (std::size_t i = 0; i + 1 < c.grid.m_list.size(); ++i)
        if (c.grid.m_list[i] >= c.grid.m_list[i + 1])
            bad_config("grid.m_list", "must be sorted ascending");
    const int max_m = c.grid.dim == 1 ? 12 : 7;
    for (int m : c.grid.m_list)
        if (m < 3 || m > max_m)
            bad_config("grid.m_list", "levels must lie in [3," + std::to_string(max_m) + "]");

    if (j.contains("weight")) {
        const auto& jw = j["weight"];
        c.weight.family = get_str(jw, "weight", "family", "constant");
        if (!kWeightFamilies.count(c.weight.family))
            bad_config("weight.family", "unknown family '" + c.weight.family + "'");
        c.weight.value = get_num(jw, "weight", "value", 1.0);
        c.weight.a = get_num(jw, "weight", "a", 0.0);
        c.weight.low = get_num(jw, "weight", "low", 1.0);
        c.weight.high = get_num(jw, "weight", "high", 1.0);
        c.weight.amplitude = get_num(jw, "weight", "amplitude", 0.0);
        if (c.weight.family == "power" &&
            !(c.weight.a > -c.grid.dim && c.weight.a < c.grid.dim))
            bad_config("weight.a", "power exponent must satisfy -dim < a < dim");
        if (c.weight.family == "constant" && !(c.weight.value > 0))
            bad_config("weight.value", "must be positive");
        if (c.weight.family == "two_valued" && !(c.weight.low > 0 && c.weight.high > 0))
            bad_config("weight.low/high", "must be positive");
    }

    if (j.contains("field")) {
        const auto& jf = j["field"];
        c.field.family = get_str(jf, "field", "family", "identity");
        if (!kFieldFamilies.count(c.field.family))
            bad_config("field.family", "unknown family '" + c.field.family + "'");
        c.field.amplitude = get_num(jf, "field", "amplitude", 0.0);
        c.field.kappa = get_num(jf, "field", "kappa", 0.0);
        if (c.field.family == "real_symmetric" &&
            !(c.field.amplitude >= 0 && c.field.amplitude < 1))
            bad_config("field.amplitude", "must lie in [0,1)");
        if (c.field.family == "complex_perturbation" &&
            !(c.field.kappa >= 0 && c.field.kappa < 1))
            bad_config("field.kappa", "must lie in [0,1)");
    }

    if (j.contains("eps_sweep")) {
        if (!j["eps_sweep"].is_array() || j["eps_sweep"].empty())
            bad_config("eps_sweep", "must be a nonempty array");
        c.eps_sweep.clear();
        for (const auto& v : j["eps_sweep"]) {
            if (!v.is_number()) bad_config("eps_sweep", "entries must be numbers");
            const double e = v.get<double>();
            if (!(e > 0 && e <= 0.125)) bad_config("eps_sweep", "entries must lie in (0,1/8]");
            c.eps_sweep.push_back(e);
        }
    }

    if (j.contains("time_grid")) {
        c.time_grid.dlog = get_num(j["time_grid"], "time_grid", "dlog", 0.25);
        if (!(c.time_grid.dlog > 0 && c.time_grid.dlog <= 0.25))
            bad_config("time_grid.dlog", "must lie in (0,0.25]");
    }

    if (j.contains("quadrature")) {
        const auto& jq = j["quadrature"];
        c.quadrature.nodes = static_cast<int>(get_num(jq, "quadrature", "nodes", 200));
        if (c.quadrature.nodes < 16) bad_config("quadrature.nodes", "need at least 16 nodes");
        c.quadrature.span_low = get_num(jq, "quadrature", "span_low", 0.1);
        c.quadrature.span_high = get_num(jq, "quadrature", "span_high", 10.0);
        if (c.quadrature.span_low > 0.1 || c.quadrature.span_high < 10.0)
            bad_config("quadrature.span", "span factors must cover [0.1, 10]");
    }

    if (j.contains("ensemble")) {
        const auto& je = j["ensemble"];
        c.ensemble.count = static_cast<int>(get_num(je, "ensemble", "count", 8));
        if (c.ensemble.count < 1) bad_config("ensemble.count", "must be at least 1");
        c.ensemble.seed = static_cast<std::uint64_t>(get_num(je, "ensemble", "seed", 1));
        c.ensemble.kmax = static_cast<int>(get_num(je, "ensemble", "kmax", 8));
        if (c.ensemble.kmax < 1) bad_config("ensemble.kmax", "must be at least 1");
        const int min_p = 1 << c.grid.m_list.front();
        if (c.ensemble.kmax > min_p / 4)
            bad_config("ensemble.kmax", "band limit exceeds P/4 of the coarsest grid");
        if (je.contains("plane_waves")) c.ensemble.plane_waves = je["plane_waves"].get<bool>();
        if (je.contains("bumps")) c.ensemble.bumps = je["bumps"].get<bool>();
    }

    if (j.contains("suites")) {
        if (!j["suites"].is_array() || j["suites"].empty())
            bad_config("suites", "must be a nonempty array");
        c.suites.clear();
        for (const auto& v : j["suites"]) {
            const std::string s = v.get<std::string>();
            if (std::find(kSuites.begin(), kSuites.end(), s) == kSuites.end())
                bad_config("suites", "unknown suite '" + s + "'");
            c.suites.push_back(s);
        }
    }

    c.out_dir = get_str(j, "config", "out_dir", "out");
    return c;
}

std::string ExperimentConfig::canonical_json() const {
    njson j;
    j["grid"] = {{"dim", grid.dim}, {"m_list", grid.m_list}, {"side", grid.side}};
    j["weight"] = {{"family", weight.family}, {"value", weight.value},
                   {"a", weight.a},          {"low", weight.low},
                   {"high", weight.high},    {"amplitude", weight.amplitude}};
    j["field"] = {{"family", field.family},
                  {"amplitude", field.amplitude},
                  {"kappa", field.kappa}};
    j["eps_sweep"] = eps_sweep;
    j["time_grid"] = {{"dlog", time_grid.dlog}};
    j["quadrature"] = {{"nodes", quadrature.nodes},
                       {"span_low", quadrature.span_low},
                       {"span_high", quadrature.span_high}};
    j["ensemble"] = {{"count", ensemble.count},
                     {"seed", ensemble.seed},
                     {"kmax", ensemble.kmax},
                     {"plane_waves", ensemble.plane_waves},
                     {"bumps", ensemble.bumps}};
    j["suites"] = suites;
    j["out_dir"] = out_dir;
    return j.dump(2);
}

std::uint64_t ExperimentConfig::digest() const { return fnv1a(canonical_json()); }

Weight weight_from_spec(std::shared_ptr<const Grid> grid, const WeightSpec& spec) {
    if (spec.family == "constant") return constant_weight(grid, spec.value);
    if (spec.family == "power") return power_weight(grid, spec.a);
    if (spec.family == "two_valued") return two_valued_weight(grid, spec.low, spec.high);
    if (spec.family == "smooth") return smooth_weight(grid, spec.amplitude);
    throw std::invalid_argument("unknown weight family " + spec.family);
}

EllipticField field_from_spec(std::shared_ptr<const Grid> grid, const Weight& w,
                              const FieldSpec& spec) {
    FieldParams p;
    if (spec.family == "identity") return make_field(grid, w, FieldKind::identity, p);
    if (spec.family == "real_symmetric") {
        p.amplitude = spec.amplitude;
        return make_field(grid, w, FieldKind::real_symmetric, p);
    }
    if (spec.family == "complex_perturbation") {
        p.kappa = spec.kappa;
        return make_field(grid, w, FieldKind::complex_perturbation, p);
    }
    throw std::invalid_argument("unknown field family " + spec.family);
}

std::vector<GridFunction> test_ensemble(std::shared_ptr<const Grid> grid,
                                        const EnsembleSpec& spec) {
    const Grid& g = *grid;
    RngStream rng(spec.seed, "ensemble/f");
    std::vector<GridFunction> out;
    const int kmax = spec.kmax;

    for (int fi = 0; fi < spec.count; ++fi) {
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(g.n_sites());
        double norm_sq = 0.0;
        const int ky_lo = g.dim() == 2 ? -kmax : 0;
        const int ky_hi = g.dim() == 2 ? kmax : 0;
        for (int kx = -kmax; kx <= kmax; ++kx) {
            for (int ky = ky_lo; ky <= ky_hi; ++ky) {
                if (kx == 0 && ky == 0) continue;
                const std::uint64_t mode_id =
                    static_cast<std::uint64_t>(kx + kmax) * (2 * kmax + 1) + (ky + kmax);
                const std::complex<double> cf =
                    rng.cgauss(static_cast<std::uint64_t>(fi) * 100000 + mode_id);
                norm_sq += std::norm(cf);
                for (std::size_t i = 0; i < g.n_sites(); ++i) {
                    Eigen::VectorXd x = g.site_position(i);
                    double arg = 2 * std::numbers::pi * kx * x[0] / g.side();
                    if (g.dim() == 2) arg += 2 * std::numbers::pi * ky * x[1] / g.side();
                    v[i] += cf * std::exp(std::complex<double>(0, arg));
                }
            }
        }
        v /= std::sqrt(std::max(1e-300, norm_sq));
        out.emplace_back(grid, std::move(v));
    }
    if (spec.plane_waves) {
        for (int k : {1, kmax}) {
            Eigen::VectorXcd v(g.n_sites());
            for (std::size_t i = 0; i < g.n_sites(); ++i) {
                Eigen::VectorXd x = g.site_position(i);
                v[i] = std::exp(std::complex<double>(
                    0, 2 * std::numbers::pi * k * x[0] / g.side()));
            }
            out.emplace_back(grid, std::move(v));
        }
    }
    if (spec.bumps) {
        // smooth bump centered off-lattice
        const double sigma = g.side() / 10;
        Eigen::VectorXcd v(g.n_sites());
        for (std::size_t i = 0; i < g.n_sites(); ++i) {
            Eigen::VectorXd x = g.site_position(i);
            double d2 = 0.0;
            for (int d = 0; d < g.dim(); ++d) {
                double dx = std::fmod(std::abs(x[d] - 0.37 * g.side()), g.side());
                dx = std::min(dx, g.side() - dx);
                d2 += dx * dx;
            }
            v[i] = std::exp(-d2 / (2 * sigma * sigma));
        }
        out.emplace_back(grid, std::move(v));
    }
    return out;
}

namespace {

struct SuiteContext {
    const ExperimentConfig& cfg;
    std::vector<ReportRecord>& records;
    std::map<std::string, std::string>& csv_files;
    njson& summary;
};

void check(ReportRecord& rec, bool ok, const std::string& what) {
    if (!ok) {
        rec.pass = false;
        rec.failures.push_back(what);
    }
}

double rel_spread(double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

struct Instance {
    std::shared_ptr<const Grid> grid;
    Weight w;
    Operator op;
};

Instance make_instance(const ExperimentConfig& cfg, int m) {
    auto grid = make_grid(cfg.grid.dim, m, cfg.grid.side);
    Weight w = weight_from_spec(grid, cfg.weight);
    EllipticField fld = field_from_spec(grid, w, cfg.field);
    return {grid, w, assemble(fld)};
}

void suite_kato(SuiteContext& ctx, ReportRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;
    CsvWriter csv({"f_id", "ratio"});
    njson per_m = njson::object();
    std::vector<double> mins, maxs;

    for (int m : cfg.grid.m_list) {
        Instance inst = make_instance(cfg, m);
        auto ensemble = test_ensemble(inst.grid, cfg.ensemble);
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        int idx = 0;
        for (const auto& f : ensemble) {
            const double r = kato_ratio(inst.op, f);
            csv.row({"m" + std::to_string(m) + "/f" + std::to_string(idx), fmt_double(r)});
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            ++idx;
        }
        mins.push_back(lo);
        maxs.push_back(hi);

        QuadratureScheme scheme = QuadratureScheme::spanning(
            inst.op, cfg.quadrature.nodes, cfg.quadrature.span_low, cfg.quadrature.span_high);
        GridFunction f0 = center_w(ensemble.front(), inst.w);
        GridFunction quad = quadrature_sqrt_apply(inst.op, f0, scheme);
        Operator root = spectral_sqrt(inst.op);
        GridFunction spec(f0.grid, root.matrix() * f0.values);
        GridFunction diff(f0.grid, quad.values - spec.values);
        const double rel = weighted_norm(diff, inst.w, NormKind::L2w) /
                           weighted_norm(spec, inst.w, NormKind::L2w);
        check(rec, rel < 1e-4, "quadrature/spectral sqrt disagreement at m=" + std::to_string(m));

        njson jm;
        jm["min"] = lo;
        jm["max"] = hi;
        jm["quad_rel_error"] = rel;
        if (inst.op.hermitian_form()) {
            auto [le, Le] = inst.op.edge_ellipticity();
            jm["bound_lo"] = std::sqrt(le);
            jm["bound_hi"] = std::sqrt(Le);
            check(rec, lo >= std::sqrt(le) - 1e-8 && hi <= std::sqrt(Le) + 1e-8,
                  "Hermitian ratio outside certified bounds at m=" + std::to_string(m));
        }
        per_m[std::to_string(m)] = jm;
    }
    if (!ctx.cfg.field.family.empty() && !mins.empty()) {
        for (std::size_t i = 0; i + 1 < mins.size(); ++i) {
            check(rec, rel_spread(mins[i], mins[i + 1]) < 0.25,
                  "ensemble min ratio varies by more than 25% across refinement");
            check(rec, rel_spread(maxs[i], maxs[i + 1]) < 0.25,
                  "ensemble max ratio varies by more than 25% across refinement");
        }
        const double overall_max = *std::max_element(maxs.begin(), maxs.end());
        const double overall_min = *std::min_element(mins.begin(), mins.end());
        check(rec, overall_max / overall_min < 10.0, "overall max/min ratio reaches 10");
        rec.scalars.emplace_back("ratio_min", overall_min);
        rec.scalars.emplace_back("ratio_max", overall_max);
    }
    ctx.csv_files["kato"] = csv.body();
    ctx.summary["suites"]["kato"]["per_m"] = per_m;
}

void suite_gaussfit(SuiteContext& ctx, ReportRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;
    CsvWriter csv({"t", "C1_t", "C2_t", "residual"});
    njson per_m = njson::object();
    for (int m : cfg.grid.m_list) {
        Instance inst = make_instance(cfg, m);
        const Grid& g = *inst.grid;
        const double lo = 4 * g.spacing() * g.spacing();
        const double hi = std::pow(g.side() / 8, 2);
        std::vector<double> ts;
        const int n_t = 16;
        for (int i = 0; i < n_t; ++i)
            ts.push_back(lo * std::exp(std::log(hi / lo) * (i + 0.5) / n_t));
        GaussianDecayFit fit = gaussian_fit(inst.op, ts);
        for (const auto& row : fit.per_t)
            csv.row({fmt_double(row.t), fmt_double(row.c1), fmt_double(row.c2),
                     fmt_double(row.max_slack)});
        njson jm;
        jm["c1"] = fit.c1;
        jm["c2"] = fit.c2;
        jm["mu"] = fit.mu;
        jm["alpha"] = fit.alpha;
        jm["v_c1"] = fit.v_c1;
        jm["v_c2"] = fit.v_c2;
        per_m[std::to_string(m)] = jm;
        check(rec, std::isfinite(fit.c1) && fit.c1 > 0 && std::isfinite(fit.c2),
              "gaussian envelope missing at m=" + std::to_string(m));
        if (cfg.field.family == "identity" && cfg.weight.family == "constant")
            check(rec, fit.c2 >= 0.225 && fit.c2 <= 0.275,
                  "identity-field C2 outside [0.225,0.275] at m=" + std::to_string(m));
        rec.scalars.emplace_back("c2_m" + std::to_string(m), fit.c2);
    }
    ctx.csv_files["gaussfit"] = csv.body();
    ctx.summary["suites"]["gaussfit"]["per_m"] = per_m;
}

void suite_squarefunc(SuiteContext& ctx, ReportRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;
    CsvWriter csv({"experiment_id", "family", "P", "ratio"});
    njson per_m = njson::object();
    std::map<std::string, std::vector<double>> max_by_kind;

    for (int m : cfg.grid.m_list) {
        Instance inst = make_instance(cfg, m);
        const Grid& g = *inst.grid;
        TimeGrid tg = TimeGrid::trusted(g, cfg.time_grid.dlog);
        LPFilter filt = LPFilter::per_frequency(inst.grid, tg);
        EnsembleSpec es = cfg.ensemble;
        es.count = std::min(es.count, 6);
        auto ensemble = test_ensemble(inst.grid, es);

        std::map<std::string, double> kind_max;
        int idx = 0;
        for (const auto& f : ensemble) {
            const std::string fid = "m" + std::to_string(m) + "/f" + std::to_string(idx);
            const SfResult vs = vertical_sf(inst.op, f, tg);
            const SfResult gs = gfunction_sf(f, filt, inst.w, tg);
            const SfResult ps = pa_sf(f, inst.w, tg);
            const SfResult ts = taylor_sf(inst.op, f, tg);
            const std::pair<std::string, double> rows[] = {
                {"vertical", vs.ratio}, {"gfunction", gs.ratio},
                {"pa", ps.ratio},       {"taylor", ts.ratio}};
            for (const auto& [kind, ratio] : rows) {
                csv.row({kind + "/" + fid, cfg.field.family,
                         std::to_string(g.points_per_side()), fmt_double(ratio)});
                check(rec, std::isfinite(ratio), kind + " ratio not finite at " + fid);
                kind_max[kind] = std::max(kind_max[kind], ratio);
            }
            ++idx;
        }
        njson jm;
        for (const auto& [kind, mx] : kind_max) {
            jm[kind + "_max"] = mx;
            max_by_kind[kind].push_back(mx);
        }

        // Schur-type decay of (tV_t)Q_s at the window's geometric center
        const double t0 = std::sqrt(g.spacing() * g.side() / 8);
        std::vector<double> svals;
        for (double r : {1.0 / 16, 1.0 / 4, 1.0, 4.0, 16.0}) svals.push_back(t0 * r);
        OpNormDecayFit schur = opnorm_decay(inst.op, LPFilter::continuum(), svals, {t0});
        jm["schur_alpha"] = schur.alpha;
        jm["schur_K"] = schur.K;
        if (cfg.field.family == "identity" && cfg.weight.family == "constant")
            check(rec, schur.alpha > 0.1, "schur alpha <= 0.1 at m=" + std::to_string(m));
        per_m[std::to_string(m)] = jm;
    }
    for (const auto& [kind, seq] : max_by_kind) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i)
            check(rec, rel_spread(seq[i], seq[i + 1]) < 0.5,
                  kind + " ratio varies by more than 50% across refinement");
    }
    ctx.csv_files["squarefunc"] = csv.body();
    ctx.summary["suites"]["squarefunc"]["per_m"] = per_m;
}

void suite_carleson(SuiteContext& ctx, ReportRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;
    CsvWriter csv({"kind", "key", "P", "value"});
    njson per_m = njson::object();
    for (int m : cfg.grid.m_list) {
        Instance inst = make_instance(cfg, m);
        const Grid& g = *inst.grid;
        const std::string p = std::to_string(g.points_per_side());
        TimeGrid tg = TimeGrid::trusted(g, cfg.time_grid.dlog);
        std::vector<double> nodes(tg.nodes.data(), tg.nodes.data() + tg.nodes.size());
        auto gammas = gamma_table(inst.op, nodes);

        CarlesonEstimate est = carleson_norm(gammas, tg, inst.w);
        for (const auto& cub : est.table)
            csv.row({"cube",
                     "k" + std::to_string(cub.level) + "/" + std::to_string(cub.index[0]) +
                         "." + std::to_string(cub.index[1]),
                     p, fmt_double(cub.value)});

        // per-node sup of |gamma| and window robustness of the running sup
        double sup_all = 0.0, sup_half = 0.0;
        for (std::size_t n = 0; n < gammas.size(); ++n) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < gammas[n].values.rows(); ++i)
                s = std::max(s, gammas[n].values.row(i).norm());
            csv.row({"gamma_sup", "t" + std::to_string(n), p, fmt_double(s)});
            sup_all = std::max(sup_all, s);
            if (tg.nodes[n] <= tg.t_hi / 2) sup_half = std::max(sup_half, s);
        }

        EnsembleSpec es = cfg.ensemble;
        es.count = std::min(es.count, 3);
        auto ensemble = test_ensemble(inst.grid, es);
        double journe_max = 0.0;
        int idx = 0;
        for (const auto& f : ensemble) {
            const double r = journe_check(gammas, tg, f, inst.w);
            csv.row({"journe", "f" + std::to_string(idx), p, fmt_double(r)});
            journe_max = std::max(journe_max, r);
            ++idx;
        }

        njson jm;
        jm["carleson_sup"] = est.sup;
        jm["carleson_shifted_sup"] = est.shifted_sup;
        jm["gamma_sup"] = sup_all;
        jm["gamma_sup_halfwindow"] = sup_half;
        jm["journe_max"] = journe_max;
        per_m[std::to_string(m)] = jm;

        check(rec, std::isfinite(est.sup), "carleson sup not finite at m=" + std::to_string(m));
        if (cfg.field.family == "identity" && cfg.weight.family == "constant") {
            check(rec, sup_all < 1e-10, "identity-field gamma not null at m=" + std::to_string(m));
        } else {
            check(rec, sup_half > 0 && sup_all / sup_half < 2.0,
                  "gamma sup grows by 2x from half window at m=" + std::to_string(m));
        }
        rec.scalars.emplace_back("carleson_sup_m" + std::to_string(m), est.sup);
    }
    ctx.csv_files["carleson"] = csv.body();
    ctx.summary["suites"]["carleson"]["per_m"] = per_m;
}

void suite_tb(SuiteContext& ctx, ReportRecord& rec) {
    const ExperimentConfig& cfg = ctx.cfg;
    CsvWriter csv({"Q_id", "eps", "eta_Q", "c_i", "c_ii", "lhs", "rhs"});
    njson per_m = njson::object();
    std::map<double, std::vector<double>> eta_series, bound_series;

    for (int m : cfg.grid.m_list) {
        Instance inst = make_instance(cfg, m);
        const Grid& g = *inst.grid;
        std::vector<int> levels;
        for (int k = 4; k <= g.levels() - 3; ++k) levels.push_back(k);
        if (levels.empty()) {
            check(rec, false, "no eligible Tb cubes at m=" + std::to_string(m) +
                                  " (need 8h <= l(Q) <= S/16)");
            continue;
        }
        TimeGrid tg = TimeGrid::trusted(g, cfg.time_grid.dlog);
        std::vector<double> nodes(tg.nodes.data(), tg.nodes.data() + tg.nodes.size());
        auto gammas = gamma_table(inst.op, nodes);
        const double eps_min = *std::min_element(cfg.eps_sweep.begin(), cfg.eps_sweep.end());
        // one net per run (a finer-aperture net covers at every swept eps)
        ConeNet net = cone_net(g.dim(), std::min(0.125, eps_min));
        njson jm = njson::object();

        for (double eps : cfg.eps_sweep) {
            double eta = std::numeric_limits<double>::infinity();
            double bound = 0.0, lemma21_max = 0.0;
            double sup_ci = 0.0, sup_cii = 0.0, sup_g = 0.0;
            bool lhs_le_rhs = true;
            for (int k : levels) {
                auto cubes = dyadic_cubes(g, k);
                TbState proto = make_fq(inst.op, cubes.front(), eps);
                for (const auto& q : cubes) {
                    TbState st = proto;
                    st.cube = q;
                    st.nus.clear();
                    st.in_eq.clear();
                    st.bad_maximal.clear();
                    for (const auto& nu : net.vectors) stopping_time(st, nu);
                    finalize_good_sets(st);
                    TbHypotheses hyp = tb_hypotheses(inst.op, st);
                    const double l21 = lemma21_check(st);
                    SawtoothResult saw = sawtooth_carleson(st, net, gammas, tg, inst.w);
                    const std::string qid = "m" + std::to_string(m) + "/k" +
                                            std::to_string(k) + "/" +
                                            std::to_string(q.index[0]) + "." +
                                            std::to_string(q.index[1]);
                    csv.row({qid, fmt_double(eps), fmt_double(saw.eta_q), fmt_double(hyp.c_i),
                             fmt_double(hyp.c_ii), fmt_double(saw.lhs), fmt_double(saw.rhs)});
                    eta = std::min(eta, saw.eta_q);
                    lemma21_max = std::max(lemma21_max, l21);
                    sup_ci = std::max(sup_ci, hyp.c_i);
                    sup_cii = std::max(sup_cii, hyp.c_ii);
                    sup_g = std::max(sup_g, hyp.g_bound);
                    if (saw.lhs > saw.rhs * (1 + 1e-12) + 1e-30) lhs_le_rhs = false;
                    bound = std::max(bound, saw.lhs);
                }
            }
            check(rec, eta > 0, "eta vanished at m=" + std::to_string(m) + " eps=" +
                                    fmt_double(eps));
            check(rec, lhs_le_rhs, "sawtooth lhs exceeded rhs at m=" + std::to_string(m) +
                                       " eps=" + fmt_double(eps));
            const double assembled = eta > 0 ? bound / eta : 0.0;
            njson je;
            je["eta"] = eta;
            je["lemma21_max"] = lemma21_max;
            je["c_i_max"] = sup_ci;
            je["c_ii_max"] = sup_cii;
            je["g_bound_max"] = sup_g;
            je["lemma114_bound"] = assembled;
            jm["eps_" + fmt_double(eps)] = je;
            eta_series[eps].push_back(eta);
            bound_series[eps].push_back(assembled);
        }
        per_m[std::to_string(m)] = jm;
    }
    for (const auto& [eps, seq] : eta_series)
        for (std::size_t i = 0; i + 1 < seq.size(); ++i)
            check(rec, rel_spread(seq[i], seq[i + 1]) < 0.25,
                  "eta varies by more than 25% across refinement at eps=" + fmt_double(eps));
    for (const auto& [eps, seq] : bound_series)
        for (std::size_t i = 0; i + 1 < seq.size(); ++i)
            check(rec, seq[i + 1] <= 2 * seq[i] && seq[i] <= 2 * seq[i + 1],
                  "assembled bound moves by more than 2x across refinement at eps=" +
                      fmt_double(eps));
    ctx.csv_files["tb"] = csv.body();
    ctx.summary["suites"]["tb"]["per_m"] = per_m;
}

std::string now_utc() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    RunResult result;
    std::map<std::string, std::string> csv_files;
    njson summary;
    summary["suites"] = njson::object();

    char digest_hex[24];
    std::snprintf(digest_hex, sizeof(digest_hex), "%016llx",
                  static_cast<unsigned long long>(cfg.digest()));

    njson manifest;
    manifest["digest"] = digest_hex;
    manifest["generator"] = "splitmix64";
    manifest["rng_streams"] = {"ensemble/f", "ainfty/subsets", "assembly/probes",
                               "cone_net/verify"};
    manifest["started_utc"] = now_utc();
    manifest["config"] = njson::parse(cfg.canonical_json());
    njson durations = njson::object();

    for (const std::string& suite : cfg.suites) {
        ReportRecord rec;
        rec.suite = suite;
        rec.digest = digest_hex;
        const auto t0 = std::chrono::steady_clock::now();
        SuiteContext ctx{cfg, result.records, csv_files, summary};
        try {
            if (suite == "kato") suite_kato(ctx, rec);
            else if (suite == "gaussfit") suite_gaussfit(ctx, rec);
            else if (suite == "squarefunc") suite_squarefunc(ctx, rec);
            else if (suite == "carleson") suite_carleson(ctx, rec);
            else if (suite == "tb") suite_tb(ctx, rec);
        } catch (const std::exception& e) {
            rec.pass = false;
            rec.failures.push_back(std::string("suite aborted: ") + e.what());
        }
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        durations[suite] = rec.seconds;
        njson& js = summary["suites"][suite];
        js["pass"] = rec.pass;
        if (!rec.failures.empty()) js["failures"] = rec.failures;
        for (const auto& [k, v] : rec.scalars) js[k] = v;
        result.records.push_back(std::move(rec));
    }

    bool all_pass = true;
    for (const auto& r : result.records) all_pass = all_pass && r.pass;
    summary["all_pass"] = all_pass;
    manifest["durations_seconds"] = durations;

    fs::create_directories(cfg.out_dir);
    auto write_file = [&](const std::string& name, const std::string& body) {
        std::ofstream out(fs::path(cfg.out_dir) / name, std::ios::binary);
        out << body;
    };
    write_file("manifest.json", manifest.dump(2) + "\n");
    write_file("summary.json", summary.dump(2) + "\n");
    for (const auto& [suite, body] : csv_files) write_file(suite + ".csv", body);

    result.exit_code = all_pass ? 0 : 1;
    return result;
}

namespace {

void diff_walk(const njson& a, const njson& b, const std::string& path,
               std::vector<std::string>& out) {
    if (a.is_object() && b.is_object()) {
        std::set<std::string> keys;
        for (const auto& [k, v] : a.items()) keys.insert(k);
        for (const auto& [k, v] : b.items()) keys.insert(k);
        for (const auto& k : keys) {
            const std::string sub = path.empty() ? k : path + "." + k;
            if (!a.contains(k)) out.push_back(sub + ": only in B");
            else if (!b.contains(k)) out.push_back(sub + ": only in A");
            else diff_walk(a[k], b[k], sub, out);
        }
        return;
    }
    if (a.is_number() && b.is_number()) {
        const double av = a.get<double>(), bv = b.get<double>();
        if (av != bv) {
            const double rel = rel_spread(av, bv);
            out.push_back(path + ": " + fmt_double(av) + " -> " + fmt_double(bv) +
                          " (rel " + fmt_double(rel) + ")");
        }
        return;
    }
    if (a != b) out.push_back(path + ": " + a.dump() + " -> " + b.dump());
}

} // namespace

std::string report_diff(const std::string& dir_a, const std::string& dir_b) {
    namespace fs = std::filesystem;
    for (const auto& d : {dir_a, dir_b}) {
        if (!fs::exists(fs::path(d) / "manifest.json"))
            throw std::invalid_argument("report_diff: missing manifest in " + d);
        if (!fs::exists(fs::path(d) / "summary.json"))
            throw std::invalid_argument("report_diff: missing summary in " + d);
    }
    auto load = [](const std::string& dir) {
        std::ifstream in(std::filesystem::path(dir) / "summary.json");
        std::stringstream ss;
        ss << in.rdbuf();
        return njson::parse(ss.str());
    };
    std::vector<std::string> lines;
    diff_walk(load(dir_a), load(dir_b), "", lines);
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

std::string list_families() {
    return "weight families:\n"
           "  constant          w = value                  (value > 0)\n"
           "  power             w = max(d(x,x0),h/2)^a     (-dim < a < dim)\n"
           "  two_valued        low on the left half, high on the right\n"
           "  smooth            exp(amplitude * sin(2 pi x / S))\n"
           "field families:\n"
           "  identity              A = w I\n"
           "  real_symmetric        A = w (I + R), |R| <= amplitude < 1\n"
           "  complex_perturbation  A = w (I + kappa B), |B| <= 1, kappa < 1\n";
}

} // namespace katolab
