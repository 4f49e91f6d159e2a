// Exercises the installed command-line surface end to end: exit codes,
// file outputs, rerun determinism. Takes the binary path as argv[1].

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g_binary;
int g_failures = 0;

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string cmd = g_binary + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (status < 0) return -1;
    return WEXITSTATUS(status);
}

void expect(bool ok, const std::string& what) {
    if (ok) {
        std::cout << "ok: " << what << "\n";
    } else {
        std::cout << "FAIL: " << what << "\n";
        ++g_failures;
    }
}

std::string dir_digest(const fs::path& dir) {
    // order-stable concatenation of (name, bytes) for rerun comparisons
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::ostringstream acc;
    for (const auto& f : files) {
        acc << f.filename().string() << ":" << testutil::read_file_bytes(f.string())
            << ";";
    }
    return acc.str();
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <path-to-mil-binary>\n";
        return 2;
    }
    g_binary = argv[1];
    testutil::TempDir tmp;
    const std::string ds = (tmp.path / "ds").string();

    expect(run("--help") == 0, "--help exits 0");
    expect(run("synth --help") == 0, "synth --help exits 0");
    expect(run("") == 2 || run("") == 1, "missing subcommand is an error");
    expect(run("bogus") != 0, "unknown subcommand is an error");

    // synth: valid run, determinism, validation failures
    expect(run("synth --bags 8 --k-min 2 --k-max 4 --patch-size 16 --seed 7 --out " + ds) == 0,
           "synth runs");
    expect(fs::exists(tmp.path / "ds" / "manifest.csv"), "synth wrote manifest.csv");
    expect(fs::exists(tmp.path / "ds" / "witness.csv"), "synth wrote witness.csv");
    const std::string digest1 = dir_digest(tmp.path / "ds");
    fs::remove_all(tmp.path / "ds");
    expect(run("synth --bags 8 --k-min 2 --k-max 4 --patch-size 16 --seed 7 --out " + ds) == 0,
           "synth reruns");
    expect(dir_digest(tmp.path / "ds") == digest1,
           "rerun with the same args is byte-identical");
    expect(run("synth --bags 8 --k-min 0 --out " + (tmp.path / "bad").string()) == 2,
           "--k-min 0 is a usage error (exit 2)");
    expect(run("synth --bags 7 --out " + (tmp.path / "bad").string()) == 2,
           "odd bag count is a usage error");

    // folds
    expect(run("folds --manifest " + ds + "/manifest.csv --folds 2 --seed 1 --out " +
               tmp.file("folds.json")) == 0,
           "folds runs");
    {
        std::ifstream in(tmp.file("folds.json"));
        json j;
        in >> j;
        expect(j["k"] == 2 && j["assignment"].size() == 8, "fold plan covers all bags");
    }

    // cv on the tiny dataset
    const std::string out1 = (tmp.path / "cv1").string();
    expect(run("cv --manifest " + ds + "/manifest.csv --pool nor --folds 2 --seed 5"
               " --max-epochs 2 --patience 1 --out-dir " + out1) == 0,
           "cv runs");
    expect(fs::exists(fs::path(out1) / "metrics.json") &&
               fs::exists(fs::path(out1) / "metrics.txt") &&
               fs::exists(fs::path(out1) / "fold-0.ckpt") &&
               fs::exists(fs::path(out1) / "fold-1.ckpt"),
           "cv wrote metrics and per-fold checkpoints");
    {
        std::ifstream in((fs::path(out1) / "metrics.json").string());
        json j;
        in >> j;
        expect(j["folds"].size() == 2 && j.contains("mean"),
               "metrics.json has per-fold entries plus mean");
    }
    expect(run("cv --manifest " + ds + "/manifest.csv --pool bogus --folds 2 --out-dir " +
               (tmp.path / "cvbad").string()) == 2,
           "--pool bogus is a usage error");
    expect(run("cv --manifest " + tmp.file("missing.csv") + " --out-dir " +
               (tmp.path / "cvbad").string()) == 1,
           "missing manifest is a runtime failure (exit 1)");

    // train -> eval -> roi round trip
    const std::string ckpt = tmp.file("model.ckpt");
    expect(run("train --manifest " + ds + "/manifest.csv --pool nor --seed 3"
               " --max-epochs 2 --patience 1 --out " + ckpt) == 0,
           "train runs");
    expect(run("eval --ckpt " + ckpt + " --manifest " + ds + "/manifest.csv --out " +
               tmp.file("eval_a.json")) == 0,
           "eval runs");
    expect(run("eval --ckpt " + ckpt + " --manifest " + ds +
               "/manifest.csv --threshold 0.3 --out " + tmp.file("eval_b.json")) == 0,
           "eval with another threshold runs");
    {
        std::ifstream ina(tmp.file("eval_a.json")), inb(tmp.file("eval_b.json"));
        json a, b;
        ina >> a;
        inb >> b;
        expect(a["auc"] == b["auc"], "threshold changes do not move AUC");
        expect(a["threshold"] != b["threshold"], "threshold recorded per run");
    }

    expect(run("roi --ckpt " + ckpt + " --image " + ds + "/bag_0000.png --out " +
               tmp.file("heat.png") + " --csv " + tmp.file("heat.csv")) == 0,
           "roi runs");
    {
        std::ifstream in(tmp.file("heat.csv"));
        std::string header;
        std::getline(in, header);
        int rows = 0;
        std::string line;
        while (std::getline(in, line)) ++rows;
        expect(header == "row,col,score,discarded" && rows >= 2,
               "roi CSV has the documented header and one row per tile");
    }
    expect(fs::exists(tmp.file("heat.png")), "roi wrote the heatmap PNG");
    expect(run("roi --ckpt " + tmp.file("nonexistent.ckpt") + " --image " + ds +
               "/bag_0000.png --out " + tmp.file("h.png")) == 1,
           "missing checkpoint is a runtime failure");

    // gradcheck (trimmed point count for test latency)
    expect(run("gradcheck --ops nor,affine --points 5 --seed 1") == 0,
           "gradcheck subset passes");
    expect(run("gradcheck --ops nosuch --points 2") == 2,
           "unknown gradcheck component is a usage error");

    // config file: overrides apply, unknown keys rejected
    {
        std::ofstream cfg(tmp.file("run.cfg"));
        cfg << "# comment\npool = isr\nmax_epochs = 2\npatience = 1\n";
    }
    expect(run("train --config " + tmp.file("run.cfg") + " --manifest " + ds +
               "/manifest.csv --out " + tmp.file("cfg.ckpt")) == 0,
           "config file accepted");
    {
        std::ofstream cfg(tmp.file("bad.cfg"));
        cfg << "not_a_key = 1\n";
    }
    expect(run("train --config " + tmp.file("bad.cfg") + " --manifest " + ds +
               "/manifest.csv --out " + tmp.file("cfg2.ckpt")) == 2,
           "unknown config key is a usage error");

    if (g_failures == 0) {
        std::cout << "all cli checks passed\n";
        return 0;
    }
    std::cout << g_failures << " cli check(s) failed\n";
    return 1;
}
