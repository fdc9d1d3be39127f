#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pointfuse/dataset.hpp"
#include "pointfuse/report.hpp"

namespace fs = std::filesystem;

namespace {

const char* kBin = POINTFUSE_BIN;

struct Workdir {
    fs::path dir;
    Workdir() {
        dir = fs::temp_directory_path() / "pf_cli_test";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workdir() { fs::remove_all(dir); }
    std::string p(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
    const int status = std::system((std::string(kBin) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("generate: arithmetic, determinism, provenance") {
    Workdir w;
    const std::string base = "generate --drivers 3 --samples-per-aoi 1 --seed 11 --outdir "
                             + w.p("") + " --out ";
    REQUIRE(run(base + w.p("a.jsonl")) == 0);
    REQUIRE(run(base + w.p("b.jsonl")) == 0);

    const pointfuse::data::Dataset ds = pointfuse::data::load_dataset(w.p("a.jsonl"));
    CHECK(ds.samples.size() == 36); // 3 drivers x 12 AOIs x 1
    CHECK(slurp(w.p("a.jsonl")) == slurp(w.p("b.jsonl"))); // byte-identical reruns
    CHECK(slurp(w.p("a.jsonl")).find("config_hash") != std::string::npos);
    CHECK(fs::exists(w.dir / "generate.manifest.jsonl"));

    SUBCASE("different seed changes the bytes") {
        REQUIRE(run("generate --drivers 3 --samples-per-aoi 1 --seed 12 --outdir " + w.p("")
                    + " --out " + w.p("c.jsonl"))
                == 0);
        CHECK(slurp(w.p("a.jsonl")) != slurp(w.p("c.jsonl")));
    }
}

TEST_CASE("error exit codes and failure hygiene") {
    Workdir w;
    // missing input file -> config error, no partial outputs
    CHECK(run("eval --data " + w.p("nope.jsonl") + " --outdir " + w.p("out")) == 2);
    CHECK(!fs::exists(w.dir / "out" / "report.jsonl"));

    // malformed data -> data error
    std::ofstream bad(w.p("bad.jsonl"));
    bad << "{this is not json}\n";
    bad.close();
    CHECK(run("eval --data " + w.p("bad.jsonl") + " --outdir " + w.p("out2")) == 3);

    // bad flag value -> config error
    CHECK(run("generate --emit nonsense --outdir " + w.p("out3")) == 2);
    CHECK(run("train --data " + w.p("bad.jsonl") + " --family hal9000 --outdir " + w.p("o4"))
          == 2); // the family name is rejected before any data is read
}

TEST_CASE("preprocess recordings to samples") {
    Workdir w;
    REQUIRE(run("generate --emit recordings --drivers 2 --samples-per-aoi 1 --context-frames 5"
                " --gap-probability 0.2 --seed 4 --outdir " + w.p("")
                + " --out " + w.p("rec.jsonl"))
            == 0);
    REQUIRE(run("preprocess --in " + w.p("rec.jsonl") + " --out " + w.p("ds.jsonl")
                + " --outdir " + w.p(""))
            == 0);
    const pointfuse::data::Dataset ds = pointfuse::data::load_dataset(w.p("ds.jsonl"));
    CHECK(ds.samples.size() == 24);
    for (const auto& s : ds.samples)
        for (const auto& f : s.frames) {
            CHECK(f.valid_eye);
            CHECK(f.valid_head);
            CHECK(f.valid_finger);
        }
}

TEST_CASE("train, bench and match") {
    Workdir w;
    REQUIRE(run("generate --drivers 4 --samples-per-aoi 2 --noise-scale 0 --missing-scale 0"
                " --driver-variation 0 --seed 2 --outdir " + w.p("") + " --out " + w.p("ds.jsonl"))
            == 0);
    REQUIRE(run("train --data " + w.p("ds.jsonl") + " --family fcnn --epochs 3 --val-drivers 1"
                " --out " + w.p("fcnn.jsonl") + " --outdir " + w.p(""))
            == 0);
    CHECK(fs::exists(w.p("fcnn.jsonl")));
    CHECK(fs::exists(w.dir / "history.jsonl"));

    CHECK(run("bench --model " + w.p("fcnn.jsonl") + " --data " + w.p("ds.jsonl") + " --n 20"
              + " --outdir " + w.p(""))
          == 0);
    CHECK(fs::exists(w.dir / "bench.csv"));

    CHECK(run("predict --model " + w.p("fcnn.jsonl") + " --data " + w.p("ds.jsonl")
              + " --out " + w.p("preds.csv") + " --outdir " + w.p(""))
          == 0);
    const std::string preds = slurp(w.p("preds.csv"));
    CHECK(preds.find("driver,true_aoi,predicted_aoi") != std::string::npos);
    CHECK(preds.find("d01,") != std::string::npos);

    REQUIRE(run("generate --emit aois --out " + w.p("aois.jsonl") + " --outdir " + w.p("")) == 0);
    CHECK(run("match --aois " + w.p("aois.jsonl") + " --vector 0.9 0.1 0.0 --outdir " + w.p(""))
          == 0);
}

TEST_CASE("eval is reproducible and report renders") {
    Workdir w;
    REQUIRE(run("generate --drivers 4 --samples-per-aoi 2 --noise-scale 0 --missing-scale 0"
                " --driver-variation 0 --seed 3 --outdir " + w.p("") + " --out " + w.p("ds.jsonl"))
            == 0);
    const std::string eval_args = "eval --data " + w.p("ds.jsonl")
                                  + " --epochs 4 --val-drivers 1 --seed 5 --outdir " + w.p("r1");
    REQUIRE(run(eval_args) == 0);
    const std::string metrics_first = slurp(w.dir / "r1" / "metrics.csv");
    const std::string manifest_first = slurp(w.dir / "r1" / "eval.manifest.jsonl");
    REQUIRE(run(eval_args) == 0); // identical invocation, identical manifest
    CHECK(slurp(w.dir / "r1" / "metrics.csv") == metrics_first);
    CHECK(slurp(w.dir / "r1" / "eval.manifest.jsonl") == manifest_first);

    REQUIRE(run("report --report " + w.p("r1/report.jsonl") + " --outdir " + w.p("plots")) == 0);
    const std::string svg = slurp(w.dir / "plots" / "confusion.svg");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("aoi12") != std::string::npos); // full 12-class grid
    CHECK(fs::exists(w.dir / "plots" / "drivers.svg"));
    CHECK(fs::exists(w.dir / "plots" / "confusion.csv"));

    SUBCASE("inputs are never mutated") {
        const std::string before = slurp(w.p("ds.jsonl"));
        REQUIRE(run(eval_args) == 0);
        CHECK(slurp(w.p("ds.jsonl")) == before);
    }
}

TEST_CASE("ablate emits the table") {
    Workdir w;
    REQUIRE(run("generate --drivers 3 --samples-per-aoi 1 --noise-scale 0 --missing-scale 0"
                " --driver-variation 0 --seed 6 --outdir " + w.p("") + " --out " + w.p("ds.jsonl"))
            == 0);
    REQUIRE(run("ablate --data " + w.p("ds.jsonl")
                + " --modality-list finger,all --class-sets 12 --epochs 2 --val-drivers 1"
                + " --outdir " + w.p(""))
            == 0);
    const std::string csv = slurp(w.dir / "ablation.csv");
    CHECK(csv.find("finger,") != std::string::npos);
    CHECK(csv.find("finger+gaze+head,") != std::string::npos);
}
