#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace {

struct Result {
    int code = -1;
    std::string out;
};

std::string fixture(const std::string& name) { return std::string(HULL_FIXTURES) + "/" + name + ".json"; }

Result run(const std::string& args, const std::string& env = "") {
    std::string cmd = env + (env.empty() ? "" : " ") + std::string(HULL_CLI) + " " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

nlohmann::json parse(const Result& r) { return nlohmann::json::parse(r.out); }

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("check-rule passes the bundled fixtures") {
    for (const char* name : {"sq", "pd", "chair"}) {
        auto r = run("check-rule " + fixture(name));
        CHECK(r.code == 0);
        auto j = parse(r);
        CHECK(j["pass"] == true);
        CHECK(j["problems"].empty());
    }
}

TEST_CASE("bad input exits with 2") {
    CHECK(run("check-rule /nonexistent/rule.json").code == 2);
    CHECK(run("").code == 2);
    CHECK(run("frobnicate " + fixture("pd")).code == 2);
    CHECK(run("towers " + fixture("sq") + " --N 10 --k 1").code == 2);
    CHECK(run("quasitile " + fixture("sq") + " --N 12 --eps 1/4").code == 2);
    CHECK(run("enumerate " + fixture("pd") + " --R -1").code == 2);
}

TEST_CASE("enumerate lists patch classes") {
    auto r = run("enumerate " + fixture("pd") + " --R 1");
    REQUIRE(r.code == 0);
    auto j = parse(r);
    CHECK(j["count"] == j["classes"].size());
    CHECK(j["count"].get<int>() >= 3);
    CHECK(j["level"].get<int>() >= 1);
}

TEST_CASE("metric of a half shift on the square lattice") {
    auto j = parse(run("metric " + fixture("sq") + " --N 8 --shift 1/2"));
    CHECK(j["lo"] == "1/4");
    CHECK(j["hi"] == "1/4");
    CHECK(j["certified"] == true);
}

TEST_CASE("invariance sandwich on random triples") {
    auto r = run("invariance " + fixture("pd") + " --N 40 --samples 50");
    CHECK(r.code == 0);
    auto j = parse(r);
    CHECK(j["triples"].size() == 50);
    CHECK(j["pass"] == true);
}

TEST_CASE("quasitile end to end on period doubling") {
    auto r = run("quasitile " + fixture("pd") + " --N 120 --eps 1/4 --radii 1,2");
    CHECK(r.code == 0);
    auto j = parse(r);
    CHECK(j["pass"] == true);
    CHECK(j["precondition_ok"] == true);
    CHECK(j["fibres"].get<int>() > 0);
    CHECK(j["steps"].size() == 2);
}

TEST_CASE("towers and the round trip") {
    auto t = run("towers " + fixture("pd") + " --N 300 --level 12 --k 2 --split 1/4");
    CHECK(t.code == 0);
    auto j = parse(t);
    CHECK(j["certificate"]["partition"] == true);
    CHECK(j["split"]["containment"] == true);
    CHECK(j["castle"]["towers"].size() == 2);

    auto s = run("suzuki-roundtrip " + fixture("pd") + " --N 300 --level 12 --k 2");
    CHECK(s.code == 0);
    CHECK(parse(s)["same_castle"] == true);
}

TEST_CASE("qd-profile CSV reaches zero at the threshold") {
    auto r = run("qd-profile " + fixture("pd") + " --N 60 --level 12 --m 5 --n 1..12");
    REQUIRE(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "n,sup_norm2,crossing");
    bool nonzero = false;
    while (std::getline(in, line)) {
        int n = std::stoi(line.substr(0, line.find(',')));
        std::string norm = line.substr(line.find(',') + 1, line.rfind(',') - line.find(',') - 1);
        if (n >= 7) CHECK(norm == "0");
        nonzero = nonzero || norm != "0";
    }
    CHECK(nonzero);

    auto j = parse(run("qd-profile " + fixture("pd") + " --N 60 --level 12 --m 5 --n 4..12 --format json"));
    CHECK(j["threshold"] == "7");
    CHECK(j["zero_past_threshold"] == true);
}

TEST_CASE("zstable trivial case and byte-identical reports") {
    std::string args = "zstable " + fixture("sq") + " --N 12 --k 0 --n 1 --Q 1 --K 1/2 --tiles 1/2 --cover 1/2";
    auto one = run(args, "HULL_THREADS=1");
    auto four = run(args, "HULL_THREADS=4");
    CHECK(one.code == 0);
    CHECK(parse(one)["pass"] == true);
    CHECK(one.out == four.out);

    auto q1 = run("quasitile " + fixture("pd") + " --N 120 --eps 1/4", "HULL_THREADS=1");
    auto q3 = run("quasitile " + fixture("pd") + " --N 120 --eps 1/4", "HULL_THREADS=3");
    CHECK(q1.out == q3.out);
}

TEST_CASE("render writes SVG") {
    std::string path = "cli_render_test.svg";
    auto r = run("render " + fixture("chair") + " --N 20 --mode patch --R 6 -o " + path);
    CHECK(r.code == 0);
    auto svg = slurp(path);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polygon") != std::string::npos);
    std::remove(path.c_str());
    CHECK(run("render " + fixture("pd") + " --mode spiral").code == 2);
}
