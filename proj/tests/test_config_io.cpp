#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "bioage/bioage.hpp"

using namespace bioage;

namespace {

const char* kFig3aText = R"(
scenario = "compare"
[model]
tau = 1.0
p = 0.5            # rejuvenation probability
delta_plus = 0.1
delta_minus = 0.1
[initial]
kind = "dirac"
b0 = 20.0
[numerics]
n_individuals = 100000
replicates = 32
seed = 7
t_end = 30.0
output_times = [1.0, 10.0, 20.0, 30.0]
)";

std::filesystem::path temp_dir(const char* stem) {
    auto p = std::filesystem::temp_directory_path() / (std::string("bioage_test_") + stem);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("parse_config resolves the probabilistic parameterization") {
    const RunSpec spec = parse_config(kFig3aText, Scenario::Compare);
    CHECK(spec.model.tau_plus == Catch::Approx(0.5).epsilon(1e-15));
    CHECK(spec.model.tau_minus == Catch::Approx(0.5).epsilon(1e-15));
    const auto vp = spec.validated();
    CHECK(vp.g_plus() == Catch::Approx(1.1).epsilon(1e-15));
    CHECK(vp.g_minus() == Catch::Approx(0.9).epsilon(1e-15));
    CHECK(spec.numerics.seed == 7);
    CHECK(spec.numerics.replicates == 32);
    CHECK(spec.numerics.output_times == std::vector<double>{1.0, 10.0, 20.0, 30.0});
    CHECK(std::get<DiracCohort>(spec.initial).b0 == 20.0);
    // defaults materialized
    CHECK(spec.numerics.n_cells == 4096);
    CHECK(spec.numerics.bin_width == 1.0);
    CHECK(spec.resolved_b_max() == Catch::Approx(200.0));
}

TEST_CASE("parse_config: the moments recipe with unequal deltas") {
    const char* text = R"(
[model]
tau_plus = 0.1
tau_minus = 0.1
delta_plus = 0.1
delta_minus = 0.01
[initial]
kind = "parabolic"
[numerics]
K = 100
t_end = 10000.0
)";
    const RunSpec spec = parse_config(text, Scenario::Moments);
    CHECK(spec.validated().g_minus() == Catch::Approx(0.99).epsilon(1e-15));
    CHECK(spec.numerics.moment_order == 100);
    CHECK(std::get<InitialDensity>(spec.initial).name == "parabolic");
    CHECK(spec.numerics.output_times == std::vector<double>{10000.0});
}

TEST_CASE("parse_config rejects malformed documents") {
    SECTION("missing parameterization names the rule") {
        CHECK_THROWS_MATCHES(
            parse_config("[model]\ntau_plus = 1.0\n[numerics]\nt_end = 1.0\n", Scenario::Ibm),
            ParseError, Catch::Matchers::MessageMatches(
                            Catch::Matchers::ContainsSubstring("parameterization")));
    }
    SECTION("both parameterizations at once") {
        CHECK_THROWS_AS(parse_config("[model]\ntau = 1.0\np = 0.5\ntau_plus = 0.2\n"
                                     "tau_minus = 0.2\n[numerics]\nt_end = 1.0\n",
                                     Scenario::Ibm),
                        ParseError);
    }
    SECTION("unknown key is reported with its line") {
        CHECK_THROWS_MATCHES(
            parse_config("[model]\ntau = 1.0\np = 0.5\ntypo_key = 3\n[numerics]\nt_end = 1\n",
                         Scenario::Ibm),
            ParseError,
            Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("typo_key")));
    }
    SECTION("unsorted output times") {
        CHECK_THROWS_AS(parse_config("[model]\ntau = 1.0\np = 0.5\n[numerics]\nt_end = 10\n"
                                     "output_times = [5.0, 1.0]\n",
                                     Scenario::Ibm),
                        ParseError);
    }
    SECTION("output time beyond t_end") {
        CHECK_THROWS_AS(parse_config("[model]\ntau = 1.0\np = 0.5\n[numerics]\nt_end = 10\n"
                                     "output_times = [11.0]\n",
                                     Scenario::Ibm),
                        ParseError);
    }
    SECTION("scenario mismatch between document and subcommand") {
        CHECK_THROWS_AS(parse_config("scenario = \"pde\"\n[model]\ntau = 1.0\np = 0.5\n"
                                     "[numerics]\nt_end = 1\n",
                                     Scenario::Ibm),
                        ParseError);
    }
    SECTION("model-core range errors surface through validation") {
        CHECK_THROWS_AS(parse_config("[model]\ntau_plus = 1.0\ntau_minus = 0.0\n"
                                     "delta_plus = 0.0\n[numerics]\nt_end = 1\n",
                                     Scenario::Ibm),
                        RangeError);
    }
    SECTION("bad number") {
        CHECK_THROWS_AS(parse_config("[model]\ntau = fast\np = 0.5\n[numerics]\nt_end = 1\n",
                                     Scenario::Ibm),
                        ParseError);
    }
    SECTION("duplicate key") {
        CHECK_THROWS_AS(parse_config("[model]\ntau = 1.0\ntau = 2.0\np = 0.5\n"
                                     "[numerics]\nt_end = 1\n",
                                     Scenario::Ibm),
                        ParseError);
    }
}

TEST_CASE("JSON front-end maps to the same RunSpec") {
    const char* json_text = R"({
        "model": {"tau": 1.0, "p": 0.5, "delta_plus": 0.1, "delta_minus": 0.1},
        "initial": {"kind": "dirac", "b0": 20.0},
        "numerics": {"n_individuals": 100000, "replicates": 32, "seed": 7,
                     "t_end": 30.0, "output_times": [1.0, 10.0, 20.0, 30.0]}
    })";
    const RunSpec from_json = parse_config(json_text, Scenario::Compare);
    const RunSpec from_toml = parse_config(kFig3aText, Scenario::Compare);
    CHECK(from_json.echo() == from_toml.echo());
}

TEST_CASE("every shipped config parses under its own scenario") {
    const std::filesystem::path dir(BIOAGE_CONFIG_DIR);
    const struct {
        const char* file;
        Scenario scenario;
    } cases[] = {
        {"fig3a.toml", Scenario::Compare},  {"fig3b.toml", Scenario::Compare},
        {"fig3c.toml", Scenario::Compare},  {"fig4_moments.toml", Scenario::Moments},
        {"fig4_chi.toml", Scenario::AnalyzeChi}, {"demography_pde.toml", Scenario::Pde},
    };
    for (const auto& c : cases) {
        INFO(c.file);
        const RunSpec spec = parse_config(read_file((dir / c.file).string()), c.scenario);
        CHECK_NOTHROW(spec.validated());
    }
}

TEST_CASE("histogram CSV round-trips exactly") {
    Histogram h;
    h.bin_width = 0.5;
    h.b_max = 3.0;
    h.counts = {4, 0, 17, 3, 0, 1};
    h.overflow = 2;
    h.total = 27;
    const Histogram back = parse_histogram_csv(emit_histogram_csv(h));
    CHECK(back.bin_width == h.bin_width);
    CHECK(back.b_max == h.b_max);
    CHECK(back.counts == h.counts);
    CHECK(back.overflow == h.overflow);
    CHECK(back.total == h.total);
}

TEST_CASE("moments CSV round-trips exactly, log flags included") {
    MomentVector a(1.5, {3.0, 0.1234567890123456, 7e300 / 7e0});
    MomentVector b;
    b.t = 2.5;
    b.values = {3.0, 420.0, 350.7};
    b.log_flags = {0, 0, 1};
    const std::vector<MomentVector> back = parse_moments_csv(emit_moments_csv({a, b}));
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        const MomentVector& orig = i == 0 ? a : b;
        CHECK(back[i].t == orig.t);
        CHECK(back[i].values == orig.values);
        CHECK(back[i].log_flags == orig.log_flags);
    }
}

TEST_CASE("density CSV round-trips exactly") {
    const Grid grid = Grid::make(10.0, 16);
    DensityState s1;
    s1.t = 0.25;
    s1.cell_masses.resize(16);
    for (int i = 0; i < 16; ++i) s1.cell_masses[static_cast<size_t>(i)] = 0.01 * i * i;
    DensityState s2 = s1;
    s2.t = 1.75;
    s2.cell_masses[3] = 1.0 / 3.0;
    const DensityTable table = parse_density_csv(emit_density_csv(grid, {s1, s2}));
    REQUIRE(table.times == std::vector<double>{0.25, 1.75});
    REQUIRE(table.centers.size() == 16);
    for (int i = 0; i < 16; ++i) {
        CHECK(table.centers[static_cast<size_t>(i)] == grid.center(i));
        CHECK(table.densities[0][static_cast<size_t>(i)] ==
              s1.cell_masses[static_cast<size_t>(i)] / grid.db);
        CHECK(table.densities[1][static_cast<size_t>(i)] ==
              s2.cell_masses[static_cast<size_t>(i)] / grid.db);
    }
}

TEST_CASE("digests are content-determined") {
    CHECK(digest_hex("abc") == digest_hex("abc"));
    CHECK(digest_hex("abc") != digest_hex("abd"));
    CHECK(digest_hex("").size() == 16);
}

TEST_CASE("execute is deterministic: identical manifests for identical specs") {
    const char* text = R"(
[model]
tau = 1.0
p = 0.5
[initial]
kind = "dirac"
b0 = 20.0
[numerics]
n_individuals = 500
replicates = 2
seed = 11
K = 2
t_end = 1.0
)";
    RunSpec spec = parse_config(text, Scenario::Ibm);
    spec.quiet = true;
    const auto dir_a = temp_dir("det_a"), dir_b = temp_dir("det_b");
    spec.out_dir = dir_a.string();
    execute(spec);
    spec.out_dir = dir_b.string();
    execute(spec);
    const auto manifest_a = nlohmann::json::parse(read_file((dir_a / "manifest.json").string()));
    const auto manifest_b = nlohmann::json::parse(read_file((dir_b / "manifest.json").string()));
    CHECK(manifest_a["files"] == manifest_b["files"]);
    CHECK(manifest_a["files"].size() >= 4);  // 2 histograms, 2 moment files, events
    CHECK(manifest_a["digest_algorithm"] == "fnv1a64");
    CHECK(manifest_a["config"]["numerics"]["seed"] == 11);
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("failed runs leave no partial outputs") {
    const char* text = R"(
[model]
tau = 1.0
p = 0.5
[initial]
kind = "dirac"
b0 = 500.0
[numerics]
b_max = 100.0
n_cells = 64
t_end = 1.0
)";
    RunSpec spec = parse_config(text, Scenario::Pde);  // cohort outside the grid
    const auto dir = temp_dir("fail");
    spec.out_dir = dir.string();
    CHECK_THROWS_AS(execute(spec), RangeError);
    size_t files = 0;
    if (std::filesystem::exists(dir))
        for ([[maybe_unused]] const auto& entry : std::filesystem::directory_iterator(dir))
            ++files;
    CHECK(files == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("ibm scenario emits parseable outputs that match a direct run") {
    const char* text = R"(
[model]
tau = 1.0
p = 0.5
[initial]
kind = "dirac"
b0 = 20.0
[numerics]
n_individuals = 2000
replicates = 1
seed = 3
K = 2
t_end = 2.0
output_times = [1.0, 2.0]
)";
    RunSpec spec = parse_config(text, Scenario::Ibm);
    spec.quiet = true;
    const auto dir = temp_dir("ibm_out");
    spec.out_dir = dir.string();
    execute(spec);

    const auto moments = parse_moments_csv(read_file((dir / "moments_r000.csv").string()));
    REQUIRE(moments.size() == 2);
    CHECK(moments[0].t == 1.0);
    CHECK(moments[1].t == 2.0);
    CHECK(moments[0].values[0] == 2000.0);

    Population pop = init_population(2000, DiracCohort{20.0}, 3, 0);
    advance(pop, 1.0, spec.validated());
    const MomentVector direct = sample_moments(pop, 2);
    CHECK(moments[0].values[1] == direct.values[1]);

    const Histogram h =
        parse_histogram_csv(read_file((dir / "hist_r000_t000.csv").string()));
    CHECK(h.total == 2000);
    std::filesystem::remove_all(dir);
}

TEST_CASE("analyze-chi scenario reports the case, x_max, and k0") {
    const char* text = R"(
[model]
tau_plus = 0.1
tau_minus = 0.1
delta_plus = 0.1
delta_minus = 0.01
[numerics]
K = 100
)";
    RunSpec spec = parse_config(text, Scenario::AnalyzeChi);
    spec.quiet = true;
    const auto dir = temp_dir("chi_out");
    spec.out_dir = dir.string();
    execute(spec);
    const auto analysis = nlohmann::json::parse(read_file((dir / "analysis.json").string()));
    CHECK(analysis["case"] == "(i)");
    CHECK(analysis["x_max"].get<double>() == Catch::Approx(21.350793105160622).epsilon(1e-12));
    CHECK(analysis["k0"] == 68);

    // chi.csv row for k = 0 is exactly zero
    const std::string csv = read_file((dir / "chi.csv").string());
    CHECK(csv.find("0,0\n") != std::string::npos);
    CHECK(csv.rfind("100,", 0) == std::string::npos);  // header intact
    std::filesystem::remove_all(dir);
}
