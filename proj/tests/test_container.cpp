#include <bit>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "lstmgrid/container.hpp"
#include "lstmgrid/lstm_ref.hpp"
#include "lstmgrid/random_network.hpp"

using namespace lstmgrid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("lstmgrid_test_container_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

nlohmann::ordered_json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::ordered_json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::ordered_json& j) { std::ofstream(p) << j.dump(2); }

void append_float(std::vector<unsigned char>& blob, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) blob.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

}  // namespace

TEST_CASE("parameter round trip") {
    const auto dir = scratch("params");
    Rng rng(1);
    for (const auto& spec : {NetworkSpec::uniform(2, 8, 5, 3), NetworkSpec::uniform(1, 6, 4, std::nullopt, false)}) {
        const auto p = random_qparams(spec, rng);
        write_params(dir / "net.json", spec, p);
        CHECK(fs::exists(dir / "net.bin"));
        const auto back = read_params(dir / "net.json");
        CHECK(back.spec.layers == spec.layers);
        CHECK(back.spec.n_out == spec.n_out);
        CHECK(back.spec.formats == spec.formats);
        CHECK(back.params == p);
    }
}

TEST_CASE("manifest layout") {
    const auto dir = scratch("layout");
    Rng rng(2);
    const auto spec = NetworkSpec::uniform(1, 4, 3, 2);
    write_params(dir / "net.json", spec, random_qparams(spec, rng));
    const auto j = read_json(dir / "net.json");
    CHECK(j["schema_version"] == 1);
    CHECK(j["blob"] == "net.bin");
    const auto& t = j["tensors"];
    CHECK(t[0]["name"] == "layer0.W_xi");
    CHECK(t[0]["shape"] == nlohmann::ordered_json::array({4, 3}));
    CHECK(t[0]["format"] == "Q2.5");
    CHECK(t[0]["offset"] == 0);
    CHECK(t[1]["name"] == "layer0.W_hi");
    CHECK(t[1]["offset"] == 12);
    CHECK(t.back()["name"] == "fc.b_y");
    // 4 gates x (12 + 16 + 4) + 3 peephole x 4 + 2 x 4 + 2
    CHECK(fs::file_size(dir / "net.bin") == 4 * 32 + 12 + 8 + 2);
}

TEST_CASE("float32 tensors are quantized on import") {
    const auto dir = scratch("float");
    Rng rng(3);
    const auto spec = NetworkSpec::uniform(1, 2, 2);
    write_params(dir / "net.json", spec, random_qparams(spec, rng));
    auto j = read_json(dir / "net.json");
    std::vector<unsigned char> blob;
    for (auto& t : j["tensors"]) {
        std::size_t n = 1;
        for (auto d : t["shape"]) n *= d.get<std::size_t>();
        t["dtype"] = "float32";
        t["offset"] = blob.size();
        for (std::size_t k = 0; k < n; ++k) append_float(blob, t["name"] == "layer0.W_xi" ? -5.0f : 0.5f);
    }
    write_json(dir / "net.json", j);
    std::ofstream(dir / "net.bin", std::ios::binary).write(reinterpret_cast<const char*>(blob.data()),
                                                           static_cast<std::streamsize>(blob.size()));
    const auto c = read_params(dir / "net.json");
    // Weights saturate on the symmetric grid; biases use the full grid.
    CHECK(c.params.layers[0].w_x[0].codes(0, 0) == -127);
    CHECK(c.params.layers[0].w_h[0].codes(1, 1) == 16);
    CHECK(c.params.layers[0].bias[3].codes[0] == 16);
}

TEST_CASE("features round trip") {
    const auto dir = scratch("features");
    Rng rng(4);
    const auto spec = NetworkSpec::uniform(1, 4, 3);
    const auto x = random_qfeatures(spec, 5, rng);
    write_features(dir / "x.json", x);
    CHECK(read_features(dir / "x.json", kQ2_5) == x);
    CHECK_THROWS_AS(read_features(dir / "x.json", kQ0_7), ConfigError);
    const QMatrix empty(kQ2_5, 0, 3);
    write_features(dir / "e.json", empty);
    CHECK(read_features(dir / "e.json", kQ2_5).rows() == 0);
}

TEST_CASE("malformed containers") {
    const auto dir = scratch("bad");
    Rng rng(5);
    const auto spec = NetworkSpec::uniform(1, 4, 3, 2);
    write_params(dir / "net.json", spec, random_qparams(spec, rng));
    const auto good = read_json(dir / "net.json");

    CHECK_THROWS_AS(read_params(dir / "missing.json"), ConfigError);

    auto j = good;
    j["schema_version"] = 2;
    write_json(dir / "net.json", j);
    CHECK_THROWS_AS(read_params(dir / "net.json"), ConfigError);

    j = good;
    j["tensors"].erase(0);
    write_json(dir / "net.json", j);
    CHECK_THROWS_WITH_AS(read_params(dir / "net.json"), doctest::Contains("layer0.W_xi"), ConfigError);

    j = good;
    j["tensors"][0]["shape"] = {3, 4};
    write_json(dir / "net.json", j);
    CHECK_THROWS_AS(read_params(dir / "net.json"), ConfigError);

    j = good;
    j["tensors"][0]["format"] = "Q0.7";
    write_json(dir / "net.json", j);
    CHECK_THROWS_WITH_AS(read_params(dir / "net.json"), doctest::Contains("Q0.7"), ConfigError);

    j = good;
    j["tensors"].back()["offset"] = 100000;
    write_json(dir / "net.json", j);
    CHECK_THROWS_AS(read_params(dir / "net.json"), ConfigError);

    std::ofstream(dir / "net.json") << "{ not json";
    CHECK_THROWS_AS(read_params(dir / "net.json"), ConfigError);
}

TEST_CASE("Q-format names") {
    CHECK(parse_qformat("Q2.5") == kQ2_5);
    CHECK(parse_qformat("Q0.7") == kQ0_7);
    CHECK(parse_qformat("Q7.0").frac_bits == 0);
    for (const char* bad : {"Q2.6", "2.5", "Q-1.8", "Q2.5x", ""}) CHECK_THROWS_AS(parse_qformat(bad), ConfigError);
}
