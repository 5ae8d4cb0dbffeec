#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "lsg/cli.hpp"
#include "lsg/io.hpp"
#include "lsg/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run lsg_run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = lsg::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lsg_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
}

std::string write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p.string();
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(lsg::cli::hex64(lsg::cli::fnv1a64(std::string_view(""))) == "cbf29ce484222325");
    CHECK(lsg::cli::hex64(lsg::cli::fnv1a64(std::string_view("a"))) == "af63dc4c8601ec8c");
    CHECK(lsg::cli::hex64(0x1f) == "000000000000001f");
}

TEST_CASE("default config round-trips through --config") {
    const fs::path d = scratch_dir("defaults");
    const json cfg = json::parse(lsg::cli::default_config_json());
    CHECK(cfg["schema_version"] == lsg::cli::kSchemaVersion);
    const std::string path = write_text(d / "cfg.json", cfg.dump());
    const Run r = lsg_run({"phantom", "--config", path, "--out", (d / "a").string()});
    CHECK(r.code == 0);
    const json m = read_json(d / "a" / "manifest.json");
    CHECK(m["config"] == cfg);
}

TEST_CASE("phantom run and manifest") {
    const fs::path d = scratch_dir("phantom");
    const Run a = lsg_run({"phantom", "--out", (d / "a").string(), "--seed", "3", "--noise", "0.05"});
    REQUIRE(a.code == 0);
    const Run b = lsg_run({"phantom", "--out", (d / "b").string(), "--seed", "3", "--noise", "0.05"});
    REQUIRE(b.code == 0);
    const json ma = read_json(d / "a" / "manifest.json");
    const json mb = read_json(d / "b" / "manifest.json");
    CHECK(ma == mb);
    CHECK(ma["tool"] == "lsg");
    CHECK(ma["subcommand"] == "phantom");
    CHECK(ma["seed"] == 3);
    CHECK(ma["rng"]["algorithm"] == std::string(lsg::CounterRng::kAlgorithm));
    CHECK(ma["config"]["phantom"]["noise_sigma"] == 0.05);
    CHECK(ma["config_hash"] == lsg::cli::hex64(lsg::cli::fnv1a64(ma["config"].dump())));
    for (const auto& [rel, hash] : ma["artifacts"].items()) {
        CHECK(fs::exists(d / "a" / rel));
        CHECK(hash == lsg::cli::hex64(lsg::cli::fnv1a64(lsg::read_bytes(d / "a" / rel))));
    }
    const lsg::ScalarField img = lsg::load_field(d / "a" / "fields" / "image.lsf");
    CHECK(img.width() == 64);

    const Run c = lsg_run({"phantom", "--out", (d / "c").string(), "--seed", "4", "--noise", "0.05"});
    CHECK(read_json(d / "c" / "manifest.json")["artifacts"]["fields/image.lsf"] !=
          ma["artifacts"]["fields/image.lsf"]);
}

TEST_CASE("td-verify on the default phantom") {
    const fs::path d = scratch_dir("td");
    const Run r = lsg_run({"td-verify", "--out", d.string()});
    REQUIRE(r.code == 0);
    const json rep = read_json(d / "reports" / "td_verify.json");
    CHECK(rep["evaluated"] == 200);
    CHECK(rep["sign_agreement"] == 1.0);
    CHECK(rep["median_rel_err"].get<double>() <= 0.10);
}

TEST_CASE("flags, --set and precedence") {
    const fs::path d = scratch_dir("flags");
    const std::string cfg =
        write_text(d / "cfg.json", R"({"schema_version": 1, "phantom": {"size": 48}})");
    Run r = lsg_run({"phantom", "--config", cfg, "--out", (d / "a").string(), "--set",
                     "phantom.kind=c-shape"});
    REQUIRE(r.code == 0);
    json m = read_json(d / "a" / "manifest.json");
    CHECK(m["config"]["phantom"]["size"] == 48);
    CHECK(m["config"]["phantom"]["kind"] == "c-shape");

    r = lsg_run({"phantom", "--config", cfg, "--out", (d / "b").string(), "--size", "40"});
    REQUIRE(r.code == 0);
    CHECK(read_json(d / "b" / "manifest.json")["config"]["phantom"]["size"] == 40);
}

TEST_CASE("validation failures exit with 1") {
    const fs::path d = scratch_dir("bad");
    const std::string out = (d / "o").string();
    CHECK(lsg_run({"phantom"}).code == 1);
    CHECK(lsg_run({"no-such-command", "--out", out}).code == 1);
    CHECK(lsg_run({"phantom", "--out", out, "--size", "8"}).code == 1);
    CHECK(lsg_run({"phantom", "--out", out, "--kind", "triangle"}).code == 1);
    CHECK(lsg_run({"phantom", "--out", out, "--size", "big"}).code == 1);
    CHECK(lsg_run({"phantom", "--out", out, "--set", "phantom.colour=3"}).code == 1);
    CHECK(lsg_run({"phantom", "--out", out, "--set", "nokey"}).code == 1);
    const std::string unknown = write_text(d / "u.json", R"({"phantom": {"sise": 64}})");
    const Run u = lsg_run({"phantom", "--config", unknown, "--out", out});
    CHECK(u.code == 1);
    CHECK(u.err.find("sise") != std::string::npos);
    const std::string wrong_type = write_text(d / "t.json", R"({"phantom": {"size": "x"}})");
    CHECK(lsg_run({"phantom", "--config", wrong_type, "--out", out}).code == 1);
    const std::string schema = write_text(d / "s.json", R"({"schema_version": 7})");
    CHECK(lsg_run({"phantom", "--config", schema, "--out", out}).code == 1);
    CHECK(lsg_run({"metrics", "--out", out}).code == 1);
    CHECK(lsg_run({"energy", "--out", out, "--image", (d / "missing.lsf").string()}).code == 1);
    const std::string garbage = write_text(d / "g.lsf", "LSF1 nonsense");
    CHECK(lsg_run({"metrics", "--out", out, "--pred", garbage, "--gt", garbage}).code == 1);
}

TEST_CASE("runtime failures exit with 2") {
    // An empty mask with a vanishing Heaviside width leaves the inside
    // region without mass.
    const fs::path d = scratch_dir("runtime");
    const lsg::ScalarField img(32, 32, 0.5), zero(32, 32);
    lsg::save_field(img, d / "img.lsf");
    lsg::save_field(zero, d / "zero.lsf");
    const Run r = lsg_run({"energy", "--out", (d / "o").string(), "--image", (d / "img.lsf").string(),
                           "--mask", (d / "zero.lsf").string(), "--distance",
                           (d / "zero.lsf").string(), "--epsilon", "1e-14"});
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("runs replay bit-identically from their manifest") {
    const fs::path d = scratch_dir("replay");
    REQUIRE(lsg_run({"phantom", "--out", (d / "ph").string(), "--noise", "0.05", "--seed", "5"}).code == 0);
    const std::string image = (d / "ph" / "fields" / "image.lsf").string();
    const std::string mask = (d / "ph" / "fields" / "mask.lsf").string();
    const std::vector<std::vector<std::string>> runs = {
        {"energy", "--image", image, "--mask", mask},
        {"par", "--image", image, "--mask", mask, "--gt", mask, "--tau", "3"},
        {"sample", "--steps", "30", "--ensemble", "2", "--size", "16", "--seed", "8"},
    };
    for (const auto& base : runs) {
        const std::string name = base[0];
        std::vector<std::string> first = base;
        first.insert(first.end(), {"--out", (d / (name + "_1")).string()});
        REQUIRE(lsg_run(first).code == 0);
        const fs::path manifest = d / (name + "_1") / "manifest.json";
        REQUIRE(lsg_run({name, "--config", manifest.string(), "--out", (d / (name + "_2")).string()})
                    .code == 0);
        const json a = read_json(manifest);
        const json b = read_json(d / (name + "_2") / "manifest.json");
        CHECK(a["artifacts"] == b["artifacts"]);
        CHECK(a["config_hash"] == b["config_hash"]);
    }
}

TEST_CASE("inputs are not modified") {
    const fs::path d = scratch_dir("inputs");
    REQUIRE(lsg_run({"phantom", "--out", (d / "ph").string()}).code == 0);
    const fs::path mask = d / "ph" / "fields" / "mask.lsf";
    const auto before = lsg::read_bytes(mask);
    REQUIRE(lsg_run({"par", "--out", (d / "p").string(), "--image",
                     (d / "ph" / "fields" / "image.lsf").string(), "--mask", mask.string()})
                .code == 0);
    CHECK(lsg::read_bytes(mask) == before);
}

TEST_CASE("help, version and default config") {
    Run r = lsg_run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("td-verify") != std::string::npos);
    r = lsg_run({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.find(std::string(lsg::cli::kToolVersion)) != std::string::npos);
    r = lsg_run({"--print-default-config"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out) == json::parse(lsg::cli::default_config_json()));
}
