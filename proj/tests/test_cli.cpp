#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "vdwalk/cli/commands.hpp"
#include "vdwalk/cli/config.hpp"
#include "vdwalk/report_io.hpp"

using namespace vdwalk;
using namespace vdwalk::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("vdwalk_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p.parent_path());
    return p;
}

int run_binary(const std::string& args) {
    const char* bin = std::getenv("VDWALK_CLI");
    REQUIRE_MESSAGE(bin != nullptr, "VDWALK_CLI not set");
    const int status = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> output_hashes(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") out[e.path().filename().string()] = sha256_file(e.path());
    return out;
}

}  // namespace

TEST_CASE("config text: sections, comments and overrides") {
    RunConfig c;
    c.merge_text("# comment\nrun.seed = 7\n[lattice]\nk = 4\nepsilon = 1/16\n", "test");
    CHECK(c.get_uint("run.seed") == 7);
    CHECK(c.get_int("lattice.k") == 4);
    CHECK(c.get_dyadic("lattice.epsilon") == Dyadic(1, 4));
    c.set("kernel.times", "0.01,0.05");
    CHECK(c.get_reals("kernel.times") == std::vector<double>{0.01, 0.05});
    c.set("davies.caps", "2,inf");
    CHECK(std::isinf(c.get_reals("davies.caps")[1]));

    RunConfig d;
    d.merge_text(c.to_text(), "round trip");
    CHECK(d.to_text() == c.to_text());
}

TEST_CASE("config errors are usage errors") {
    RunConfig c;
    CHECK_THROWS_AS(c.set("lattice.nope", "1"), UsageError);
    CHECK_THROWS_AS(c.set("lattice.k", "four"), UsageError);
    CHECK_THROWS_AS(c.set("lattice.epsilon", "0.1"), UsageError);
    CHECK_THROWS_AS(c.set("run.seed", "-3"), UsageError);
    CHECK_THROWS_AS(c.merge_text("[lattice]\nk 5\n", "bad"), UsageError);
    CHECK(command_sections("check-hk") == std::vector<std::string>{"", "run", "lattice", "hk"});
}

TEST_CASE("csv quoting and sha256") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CsvTable t({"name", "value"});
    t.row("x", 0.1);
    t.row(std::string("y,z"), std::numeric_limits<double>::infinity());
    CHECK(t.str() == "name,value\r\nx,0.10000000000000001\r\n\"y,z\",inf\r\n");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(format_double(std::stod(format_double(1.0 / 3.0))) == format_double(1.0 / 3.0));
}

TEST_CASE("invalid lattice parameters exit with status 1 and leave nothing behind") {
    const fs::path out = scratch("bad_eps");
    CHECK(run_binary("lattice-info --out " + out.string() + " --epsilon 3/4") == 1);
    CHECK_FALSE(fs::exists(out));
    CHECK(run_binary("lattice-info --out " + out.string() + " --epsilon 0.1") == 1);
    CHECK(run_binary("lattice-info --out " + out.string() + " --set lattice.unknown=1") == 1);
    CHECK(run_binary("no-such-command --out " + out.string()) != 0);
}

TEST_CASE("a failure after the first file is written removes the partial outputs") {
    const fs::path out = scratch("partial");
    RunConfig c;
    c.set("lattice.k", "3");
    c.set("kernel.x0", "plane:0.001:0");
    std::ostringstream log;
    const RunResult r = run_command("kernel", c, out, log);
    CHECK(r.exit_code == kExitUsage);
    CHECK_FALSE(r.error.empty());
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("binary: check-iso and converge write their reports") {
    const fs::path iso = scratch("iso");
    REQUIRE(run_binary("check-iso --out " + iso.string() +
                       " --ladder 3,4 --window 3/4 --random_sets 20 --random_max_size 50") == 0);
    const json j = json::parse(read_file(iso / "iso.json"));
    REQUIRE(j.contains("scans"));
    for (const auto& s : j["scans"]) CHECK(s["minimum_normalized_constant"].get<double>() > 0.0);

    const fs::path conv = scratch("converge");
    REQUIRE(run_binary("converge --out " + conv.string() + " --ladder 3,4 --paths 2000 --T 0.05") == 0);
    CHECK(fs::exists(conv / "ks.csv"));
    const json m = json::parse(read_file(conv / "manifest.json"));
    CHECK(m["subcommand"] == "converge");
    CHECK(m["status"] == "ok");
    for (const auto& e : m["outputs"]) CHECK(sha256_file(conv / e["file"].get<std::string>()) == e["sha256"]);
}

TEST_CASE("replay reproduces outputs byte for byte under a different thread count") {
    const fs::path a = scratch("replay_a"), b = scratch("replay_b");
    RunConfig c;
    c.set("lattice.k", "4");
    c.set("simulate.paths", "3000");
    c.set("run.threads", "1");
    std::ostringstream log;
    REQUIRE(run_command("simulate", c, a, log).exit_code == kExitOk);
    REQUIRE(replay_manifest(a / "manifest.json", b, 4, log).exit_code == kExitOk);
    CHECK(output_hashes(a) == output_hashes(b));
    CHECK(read_file(a / "config.txt") == read_file(b / "config.txt"));
    CHECK(json::parse(read_file(b / "manifest.json"))["threads"] == 4);
}
