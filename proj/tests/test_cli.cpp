#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mural/distance.hpp"
#include "mural/eval.hpp"
#include "mural/missingness.hpp"

using namespace mural;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(MURAL_CLI_PATH) + " " + args + " 2>&1";
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) result.output += buf.data();
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mural_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// swiss-roll sample with the documented missingness recipe, written to disk
void write_roll_files(const TempDir& dir, std::size_t n, std::uint64_t seed) {
    const auto roll = gen_swiss_roll_5d(n, 0.0, seed);
    std::vector<double> sorted;
    for (std::size_t i = 0; i < n; ++i) sorted.push_back(roll.ambient.real(0, (RowIndex)i));
    std::sort(sorted.begin(), sorted.end());
    Dataset masked = induce_mnar_threshold(
        roll.ambient, 0, sorted[static_cast<std::size_t>(0.7 * (n - 1))], Direction::Above);
    masked = induce_mcar(masked, 1, 0.25, seed * 1000003ULL + 1);
    masked = induce_mcar(masked, 2, 0.35, seed * 1000003ULL + 2);
    write_csv_file(masked, dir.file("roll.csv"));
    masked.schema().save_file(dir.file("roll.schema"));
}

}  // namespace

TEST_CASE("missing schema file exits 1 and names the path") {
    const auto res = run_cli("fit --data nowhere.csv --schema nowhere.schema");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("error:") != std::string::npos);
    CHECK(res.output.find("nowhere.schema") != std::string::npos);
}

TEST_CASE("unknown experiment exits 1") {
    const auto res = run_cli("eval --experiment nope");
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("nope") != std::string::npos);
}

TEST_CASE("fit pipeline and reports") {
    TempDir dir;
    write_roll_files(dir, 500, 3);

    const std::string fit_args = "fit --data " + dir.file("roll.csv") + " --schema " +
                                 dir.file("roll.schema") + " --out " + dir.file("roll.forest") +
                                 " --trees 20 --seed 7";
    const auto res = run_cli(fit_args);
    REQUIRE(res.exit_code == 0);
    CHECK(res.output.find("1 MNAR") != std::string::npos);
    CHECK(res.output.find("2 randomly missing") != std::string::npos);

    SUBCASE("profile report lists the columns") {
        const auto report = slurp(dir.file("roll.forest.profile.txt"));
        CHECK(report.find("x1") != std::string::npos);
        CHECK(report.find("MNAR") != std::string::npos);
        const auto json = slurp(dir.file("roll.forest.profile.json"));
        CHECK(json.find("\"classification\": \"mnar\"") != std::string::npos);
        CHECK(json.find("\"classification\": \"random\"") != std::string::npos);
    }
    SUBCASE("same seed twice gives byte-identical forests") {
        const std::string first = slurp(dir.file("roll.forest"));
        const auto rerun = run_cli(fit_args);
        REQUIRE(rerun.exit_code == 0);
        CHECK(slurp(dir.file("roll.forest")) == first);
    }
    SUBCASE("config sidecar reruns to identical output") {
        const std::string first = slurp(dir.file("roll.forest"));
        const auto rerun = run_cli("fit --config " + dir.file("roll.forest.config") +
                                   " --out " + dir.file("again.forest"));
        REQUIRE(rerun.exit_code == 0);
        CHECK(slurp(dir.file("again.forest")) == first);
    }
}

TEST_CASE("dist matrices and affinity") {
    TempDir dir;
    write_roll_files(dir, 200, 5);
    REQUIRE(run_cli("fit --data " + dir.file("roll.csv") + " --schema " +
                    dir.file("roll.schema") + " --out " + dir.file("roll.forest") +
                    " --trees 10 --seed 1")
                .exit_code == 0);

    SUBCASE("csv matrix is symmetric with a zero diagonal") {
        REQUIRE(run_cli("dist --forest " + dir.file("roll.forest") + " --data " +
                        dir.file("roll.csv") + " --out " + dir.file("dm.csv"))
                    .exit_code == 0);
        const auto m = load_matrix(dir.file("dm.csv"));
        REQUIRE(m.size() == 200);
        for (std::size_t i = 0; i < m.size(); ++i) {
            CHECK(m.at(i, i) == 0.0);
            for (std::size_t j = 0; j < m.size(); ++j) CHECK(m.at(i, j) == m.at(j, i));
        }
    }
    SUBCASE("binary format round-trips to the csv values") {
        REQUIRE(run_cli("dist --forest " + dir.file("roll.forest") + " --data " +
                        dir.file("roll.csv") + " --out " + dir.file("dm.bin") +
                        " --format bin")
                    .exit_code == 0);
        REQUIRE(run_cli("dist --forest " + dir.file("roll.forest") + " --data " +
                        dir.file("roll.csv") + " --out " + dir.file("dm.csv"))
                    .exit_code == 0);
        const auto bin = load_matrix(dir.file("dm.bin"));
        const auto csv = load_matrix(dir.file("dm.csv"));
        REQUIRE(bin.size() == csv.size());
        for (std::size_t i = 0; i < bin.size(); ++i)
            for (std::size_t j = 0; j < bin.size(); ++j)
                CHECK(bin.at(i, j) == csv.at(i, j));
    }
    SUBCASE("diffusion rows sum to one") {
        REQUIRE(run_cli("dist --forest " + dir.file("roll.forest") + " --data " +
                        dir.file("roll.csv") + " --out " + dir.file("dm.csv") +
                        " --affinity")
                    .exit_code == 0);
        const auto p = load_matrix(dir.file("dm.csv.diffusion.csv"));
        for (std::size_t i = 0; i < p.size(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < p.size(); ++j) {
                sum += p.at(i, j);
                CHECK(p.at(i, j) >= 0.0);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("tswd cohorts") {
    TempDir dir;
    write_roll_files(dir, 300, 9);
    REQUIRE(run_cli("fit --data " + dir.file("roll.csv") + " --schema " +
                    dir.file("roll.schema") + " --out " + dir.file("roll.forest") +
                    " --trees 10 --seed 2")
                .exit_code == 0);
    const std::string base = "tswd --forest " + dir.file("roll.forest") + " --data " +
                             dir.file("roll.csv") + " ";

    SUBCASE("identical cohorts have zero distance under --allow-overlap") {
        const auto res = run_cli(base + "--cohort-a \"x2>10\" --cohort-b \"x2>10\" "
                                        "--allow-overlap");
        REQUIRE(res.exit_code == 0);
        CHECK(res.output.find("tswd_mean = 0\n") != std::string::npos);
    }
    SUBCASE("overlap is rejected without the flag") {
        const auto res = run_cli(base + "--cohort-a \"x2>10\" --cohort-b \"x2>5\"");
        CHECK(res.exit_code == 1);
        CHECK(res.output.find("overlap") != std::string::npos);
    }
    SUBCASE("malformed expression names itself") {
        const auto res = run_cli(base + "--cohort-a \"x2 >>> 1\" --cohort-b \"x2<=1\"");
        CHECK(res.exit_code == 1);
        CHECK(res.output.find("x2 >>> 1") != std::string::npos);
    }
    SUBCASE("missing/observed forms and importance output") {
        const auto res = run_cli(base + "--cohort-a \"x1 missing\" --cohort-b \"x1 observed\" "
                                        "--importance " + dir.file("imp.csv") + " --plot " +
                                 dir.file("imp.svg"));
        REQUIRE(res.exit_code == 0);
        const auto imp = slurp(dir.file("imp.csv"));
        CHECK(imp.find("variable,share") != std::string::npos);
        CHECK(imp.find("x1") != std::string::npos);
        CHECK(slurp(dir.file("imp.svg")).find("<svg") != std::string::npos);
    }
    SUBCASE("row-id file cohorts") {
        {
            std::ofstream ids(dir.file("ids.txt"));
            ids << "# first three rows\n0\n1\n2\n";
        }
        const auto res = run_cli(base + "--cohort-a @" + dir.file("ids.txt") +
                                 " --cohort-b \"x2>15\"");
        REQUIRE(res.exit_code == 0);
        CHECK(res.output.find("cohort_a_size = 3") != std::string::npos);
    }
}

TEST_CASE("eval swissroll table and determinism") {
    TempDir dir;
    const std::string args = "eval --experiment swissroll --n 400 --seeds 2 --trees 15 "
                             "--quick --out-dir " + dir.file("out");
    const auto res = run_cli(args);
    REQUIRE(res.exit_code == 0);
    const auto csv = slurp(dir.file("out") + "/swissroll.csv");
    CHECK(csv.find("MURAL,P@5,") != std::string::npos);
    CHECK(csv.find("MURAL,P@10,") != std::string::npos);
    CHECK(csv.find("MURAL,P@100,") != std::string::npos);
    CHECK(csv.find("MeanImputation,P@5,") != std::string::npos);

    SUBCASE("seed-pinned rerun is byte-identical") {
        const auto rerun = run_cli(args);
        REQUIRE(rerun.exit_code == 0);
        CHECK(slurp(dir.file("out") + "/swissroll.csv") == csv);
    }
    SUBCASE("ablation table sweeps the knob") {
        const auto ab = run_cli("eval --experiment ablation --knob trees --values 5,15 "
                                "--n 300 --seeds 2 --quick --out-dir " + dir.file("ab"));
        REQUIRE(ab.exit_code == 0);
        const auto table = slurp(dir.file("ab") + "/ablation_trees.csv");
        CHECK(table.find("trees=5,P@5,") != std::string::npos);
        CHECK(table.find("trees=15,P@5,") != std::string::npos);
        CHECK(table.find("MeanImputation,P@5,") != std::string::npos);
    }
}

TEST_CASE("cluster on a block-diagonal toy matrix") {
    TempDir dir;
    const std::size_t per = 8, n = 2 * per;
    SquareMatrix dm(n, 10.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i / per == j / per) dm.at(i, j) = i == j ? 0.0 : 1.0;
    save_matrix(dm, dir.file("toy.csv"), false);

    const auto res = run_cli("cluster --input " + dir.file("toy.csv") + " --k 2 --out " +
                             dir.file("labels.csv") + " --bandwidth fixed:4");
    REQUIRE(res.exit_code == 0);

    // parse labels and check the blocks
    std::ifstream in(dir.file("labels.csv"));
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "row,label");
    std::vector<std::int32_t> labels;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        labels.push_back(std::stoi(line.substr(comma + 1)));
    }
    REQUIRE(labels.size() == n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK((labels[i] == labels[j]) == (i / per == j / per));

    // the printed silhouette matches a local recomputation
    DistanceMatrix dmm{dm};
    const double expected = silhouette(dmm, labels);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "silhouette = %.9g", expected);
    CHECK(res.output.find(buf) != std::string::npos);
}
