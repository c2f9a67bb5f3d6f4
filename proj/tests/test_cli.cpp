#include "katolab/runner.hpp"

#include "katolab/report.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace katolab;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kSmokeConfig = R"({
  "grid": {"dim": 1, "m_list": [5], "side": 1.0},
  "weight": {"family": "constant", "value": 1.0},
  "field": {"family": "identity"},
  "ensemble": {"count": 3, "seed": 42, "kmax": 4},
  "suites": ["kato"],
  "out_dir": "OUT"
})";

} // namespace

TEST_SUITE("cli") {

TEST_CASE("config validation reports the offending field") {
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text("{nope"),
                         doctest::Contains("not valid JSON"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(ExperimentConfig::from_json_text("{}"),
                         doctest::Contains("config.grid"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(R"({"grid":{"dim":1,"m_list":[6,5]}})"),
        doctest::Contains("m_list"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"grid":{"dim":1,"m_list":[5]},"weight":{"family":"bogus"}})"),
        doctest::Contains("weight.family"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"grid":{"dim":1,"m_list":[5]},"weight":{"family":"power","a":1.5}})"),
        doctest::Contains("weight.a"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"grid":{"dim":1,"m_list":[5]},"suites":["nope"]})"),
        doctest::Contains("unknown suite"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"grid":{"dim":1,"m_list":[5]},"ensemble":{"kmax":30}})"),
        doctest::Contains("band limit"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        ExperimentConfig::from_json_text(
            R"({"grid":{"dim":1,"m_list":[5]},"eps_sweep":[0.5]})"),
        doctest::Contains("eps_sweep"), std::invalid_argument);
}

TEST_CASE("canonical form and digest are stable") {
    ExperimentConfig a = ExperimentConfig::from_json_text(kSmokeConfig);
    ExperimentConfig b = ExperimentConfig::from_json_text(kSmokeConfig);
    CHECK(a.canonical_json() == b.canonical_json());
    CHECK(a.digest() == b.digest());
    b.ensemble.seed = 43;
    CHECK(a.digest() != b.digest());
}

TEST_CASE("ensembles are seed-deterministic and refinement-coherent") {
    EnsembleSpec spec;
    spec.count = 2;
    spec.seed = 7;
    spec.kmax = 4;
    auto g = make_grid(1, 6, 1.0);
    auto e1 = test_ensemble(g, spec);
    auto e2 = test_ensemble(g, spec);
    REQUIRE(e1.size() == e2.size());
    for (std::size_t i = 0; i < e1.size(); ++i)
        CHECK((e1[i].values - e2[i].values).cwiseAbs().maxCoeff() == 0.0);

    EnsembleSpec other = spec;
    other.seed = 8;
    auto e3 = test_ensemble(g, other);
    CHECK((e1[0].values - e3[0].values).cwiseAbs().maxCoeff() > 1e-8);

    // the same continuum functions appear at finer resolution
    auto gf = make_grid(1, 7, 1.0);
    auto ef = test_ensemble(gf, spec);
    const double n_coarse = e1[0].values.norm() * std::sqrt(g->cell_measure());
    const double n_fine = ef[0].values.norm() * std::sqrt(gf->cell_measure());
    CHECK(n_coarse == doctest::Approx(n_fine).epsilon(1e-10));
}

TEST_CASE("fmt_double round-trips cleanly") {
    for (double v : {1.0, 0.1, 1.5625, 3.141592653589793, 1e-300, -2.5e17}) {
        double back;
        std::sscanf(fmt_double(v).c_str(), "%lf", &back);
        CHECK(back == v);
    }
    CHECK(fmt_double(0.5) == "0.5");
    CHECK(fmt_double(2.0) == "2");
}

TEST_CASE("smoke run writes deterministic outputs and passes") {
    namespace fs = std::filesystem;
    const fs::path base = fs::temp_directory_path() / "katolab_test_run";
    fs::remove_all(base);

    ExperimentConfig cfg = ExperimentConfig::from_json_text(kSmokeConfig);
    cfg.out_dir = (base / "a").string();
    RunResult r1 = run_experiment(cfg);
    CHECK(r1.exit_code == 0);
    REQUIRE(r1.records.size() == 1);
    CHECK(r1.records[0].pass);

    CHECK(fs::exists(base / "a" / "manifest.json"));
    CHECK(fs::exists(base / "a" / "summary.json"));
    CHECK(fs::exists(base / "a" / "kato.csv"));

    // identity field over the flat weight: every ratio is 1
    const std::string csv = slurp(base / "a" / "kato.csv");
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "f_id,ratio");
    int rows = 0;
    while (std::getline(ss, line)) {
        const auto comma = line.find(',');
        const double ratio = std::stod(line.substr(comma + 1));
        CHECK(ratio == doctest::Approx(1.0).epsilon(1e-9));
        ++rows;
    }
    CHECK(rows == 6); // 3 random + 2 plane waves + 1 bump

    cfg.out_dir = (base / "b").string();
    RunResult r2 = run_experiment(cfg);
    CHECK(r2.exit_code == 0);
    CHECK(slurp(base / "a" / "kato.csv") == slurp(base / "b" / "kato.csv"));
    CHECK(slurp(base / "a" / "summary.json") == slurp(base / "b" / "summary.json"));

    CHECK(report_diff((base / "a").string(), (base / "b").string()).empty());

    // a different seed shows up in the diff but keeps the schema
    ExperimentConfig cfg2 = cfg;
    cfg2.ensemble.seed = 99;
    cfg2.out_dir = (base / "c").string();
    run_experiment(cfg2);
    const std::string d = report_diff((base / "a").string(), (base / "c").string());
    CHECK(!d.empty());
    CHECK(d.find("kato") != std::string::npos);

    CHECK_THROWS_WITH_AS(report_diff((base / "a").string(), (base / "missing").string()),
                         doctest::Contains("missing manifest"), std::invalid_argument);
    fs::remove_all(base);
}

TEST_CASE("family listing names every selectable family") {
    const std::string s = list_families();
    for (const char* fam :
         {"constant", "power", "two_valued", "smooth", "identity", "real_symmetric",
          "complex_perturbation"})
        CHECK(s.find(fam) != std::string::npos);
}

} // TEST_SUITE
