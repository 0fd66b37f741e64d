#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result cli(const std::string& args) {
    const std::string cmd = std::string(LSTMGRID_CLI) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    Result r;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

bool contains(const std::string& s, const std::string& what) { return s.find(what) != std::string::npos; }

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lstmgrid_cli_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("plan") {
    auto r = cli("plan");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "2x2, 4 dies"));

    r = cli("plan --time-multiplexed");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "pins: 17"));

    const auto dir = scratch("plan");
    r = cli("plan --net 3,384,384 --out " + dir.string());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "48 dies"));
    CHECK(std::filesystem::exists(dir / "plan.json"));
}

TEST_CASE("run is bit-exact and writes its artifacts") {
    const auto dir = scratch("run");
    auto r = cli("run --steps 2 --out " + dir.string());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "BIT-EXACT: yes"));
    for (const char* f : {"outputs.csv", "trace.csv", "report.txt", "plan.json"})
        CHECK(std::filesystem::exists(dir / f));

    r = cli("run --steps 3 --net 2,20,10,4 --reload --format csv");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "BIT-EXACT: yes"));
    CHECK(contains(r.out, "section,name,value,unit"));

    r = cli("run --steps 3 --net 2,20,10,4 --chip-select");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "BIT-EXACT: yes"));
}

TEST_CASE("run is deterministic") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    REQUIRE(cli("run --steps 2 --seed 9 --net 1,30,20,3 --out " + a.string()).code == 0);
    REQUIRE(cli("run --steps 2 --seed 9 --net 1,30,20,3 --out " + b.string()).code == 0);
    for (const char* f : {"outputs.csv", "trace.csv", "report.txt", "plan.json"}) {
        std::ifstream fa(a / f), fb(b / f);
        const std::string sa((std::istreambuf_iterator<char>(fa)), {});
        const std::string sb((std::istreambuf_iterator<char>(fb)), {});
        CHECK_MESSAGE(sa == sb, f);
    }
}

TEST_CASE("zero steps") {
    const auto r = cli("run --steps 0");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "BIT-EXACT: yes"));
}

TEST_CASE("exit codes") {
    auto r = cli("plan --net 1,96,2000");
    CHECK(r.code == 2);
    CHECK(contains(r.out, "86016"));

    r = cli("run --steps 2 --fault 'flip:G0(0,1).out:8:3'");
    CHECK(r.code == 3);

    r = cli("run --steps 2 --fault 'stuck:G0(0,1).out'");
    CHECK(r.code == 3);
    CHECK(contains(r.out, "G0(0,1).out"));

    CHECK(cli("").code == 1);
    CHECK(cli("frobnicate").code == 1);
    CHECK(cli("run --net 1,2").code == 1);
    CHECK(cli("run --reload --chip-select").code == 1);
    CHECK(cli("run --fault 'stuck:nowhere'").code == 1);
    CHECK(cli("run --freq -5").code == 1);
    CHECK(cli("plan --config /nonexistent.yaml").code == 1);
}

TEST_CASE("sweep") {
    auto r = cli("sweep --axis grid --values ''");
    CHECK(r.code == 0);
    CHECK(r.out == "n,chips,n_hidden,time_us,power_cores_mw,energy_cores_uj,energy_io_uj,io_pct\n");

    r = cli("sweep --axis grid --values 1,2");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "\n2,4,192,"));

    r = cli("sweep --axis frequency --values 10,100");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "peak_gops_per_die"));

    r = cli("sweep --axis frac_bits --values 5,9");
    CHECK(r.code == 1);
    CHECK(contains(r.out, "\n5,Q2.5,yes,"));
    CHECK(contains(r.out, "frac_bits=9"));

    CHECK(cli("sweep --axis voltage --values 1").code == 1);
}

TEST_CASE("table4 and lut-dump") {
    auto r = cli("table4 --format csv");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "\n3,384,16,48,48,"));

    r = cli("lut-dump --kind sigmoid");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "code,input,output_code,output"));
}
