#pragma once

#include "katolab/elliptic.hpp"
#include "katolab/weights.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace katolab {

struct GridSpec {
    int dim = 1;
    std::vector<int> m_list{7};
    double side = 1.0;
};

struct WeightSpec {
    std::string family = "constant";
    double value = 1.0;     // constant
    double a = 0.0;         // power exponent
    double low = 1.0;       // two_valued
    double high = 1.0;
    double amplitude = 0.0; // smooth
};

struct FieldSpec {
    std::string family = "identity";
    double amplitude = 0.0; // real_symmetric
    double kappa = 0.0;     // complex_perturbation
};

struct TimeGridSpec {
    double dlog = 0.25;
};

struct QuadratureSpec {
    int nodes = 200;
    double span_low = 0.1;
    double span_high = 10.0;
};

struct EnsembleSpec {
    int count = 8;
    std::uint64_t seed = 1;
    int kmax = 8;
    bool plane_waves = true;
    bool bumps = true;
};

struct ExperimentConfig {
    GridSpec grid;
    WeightSpec weight;
    FieldSpec field;
    std::vector<double> eps_sweep{0.025, 0.05, 0.1};
    TimeGridSpec time_grid;
    QuadratureSpec quadrature;
    EnsembleSpec ensemble;
    std::vector<std::string> suites{"kato"};
    std::string out_dir = "out";

    /// Parses and validates; throws std::invalid_argument with a field-level
    /// message on any problem.
    static ExperimentConfig from_json_text(const std::string& text);
    std::string canonical_json() const;
    std::uint64_t digest() const;
};

struct ReportRecord {
    std::string suite;
    std::string digest;
    std::vector<std::pair<std::string, double>> scalars;
    bool pass = true;
    std::vector<std::string> failures;
    double seconds = 0.0;
};

struct RunResult {
    int exit_code = 0;
    std::vector<ReportRecord> records;
};

/// Executes the selected suites over the refinement series and writes
/// manifest.json, <suite>.csv and summary.json under config.out_dir.
/// Nonzero exit code iff some suite failed its thresholds.
RunResult run_experiment(const ExperimentConfig& config);

/// Field-by-field comparison of two summary.json files with relative deltas;
/// empty string when identical.
std::string report_diff(const std::string& dir_a, const std::string& dir_b);

std::string list_families();

/// Deterministic test-function ensemble: band-limited random fields drawn by
/// mode index (grid-independent, so refinements sample the same functions),
/// plus optional plane waves and a bump.
std::vector<GridFunction> test_ensemble(std::shared_ptr<const Grid> grid,
                                        const EnsembleSpec& spec);

Weight weight_from_spec(std::shared_ptr<const Grid> grid, const WeightSpec& spec);
EllipticField field_from_spec(std::shared_ptr<const Grid> grid, const Weight& w,
                              const FieldSpec& spec);

} // namespace katolab
