#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ddci/phantom.hpp"
#include "ddci/storage.hpp"

using namespace ddci;

namespace {

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "ddci_storage_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

Checkpoint tiny_checkpoint(std::uint64_t seed) {
    CascadeConfig cfg;
    cfg.iterations = 1;
    cfg.subnet = SubnetConfig{2, 4, 3, 2, 1};
    Rng rng(seed);
    Checkpoint ck;
    ck.config_text = canonical_config_text(cfg);
    ck.steps_done = 7;
    ck.epochs_done = 2;
    ck.params = init_model(cfg, rng);
    ck.optim = init_optim(ck.params, AdamConfig{});
    ck.optim.step = 7;
    for (RealTensor& m : ck.optim.m)
        for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(-1, 1);
    return ck;
}

}  // namespace

TEST_SUITE("storage") {

TEST_CASE("tensor files round trip byte-identically") {
    const auto dir = temp_dir();
    Rng rng(1);

    RealTensor t({2, 3, 4});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-10, 10);
    const std::string p1 = (dir / "real.ddt").string();
    write_tensor(p1, t);
    RealTensor back = read_real_tensor(p1);
    REQUIRE(back.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) REQUIRE(back[i] == t[i]);
    const std::string p2 = (dir / "real2.ddt").string();
    write_tensor(p2, back);
    CHECK(slurp(p1) == slurp(p2));

    ComplexImage x(2, 4, 4);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const std::string p3 = (dir / "cplx.ddt").string();
    write_tensor(p3, x);
    ComplexImage xb = read_complex_image(p3);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(xb[i] == x[i]);
}

TEST_CASE("tensor file size follows the documented layout") {
    // 1x2x2 complex: 4 magic + 1 dtype + 1 rank + 3*4 dims + 2*2*16 payload
    ComplexImage x(1, 2, 2);
    const std::vector<std::uint8_t> bytes = encode_tensor(x);
    CHECK(bytes.size() == 4 + 1 + 1 + 3 * 4 + 2 * 2 * 16);
}

TEST_CASE("bad magic and dtype confusion are typed errors") {
    ComplexImage x(1, 2, 2);
    std::vector<std::uint8_t> bytes = encode_tensor(x);
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_complex_image(bad.data(), bad.size()), FormatError);

    // complex file read as real and vice versa
    CHECK_THROWS_AS(decode_real_tensor(bytes.data(), bytes.size()), FormatError);
    RealTensor t({2, 2});
    const std::vector<std::uint8_t> rb = encode_tensor(t);
    CHECK_THROWS_AS(decode_complex_image(rb.data(), rb.size()), FormatError);
}

TEST_CASE("truncations and header corruptions never crash") {
    ComplexImage x(1, 4, 4);
    Rng rng(2);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const std::vector<std::uint8_t> bytes = encode_tensor(x);

    for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
        CHECK_THROWS_AS(decode_complex_image(part.data(), part.size()), FormatError);
    }
    // header byte flips (magic, dtype, rank, dims)
    for (std::size_t pos = 0; pos < 18; ++pos) {
        for (const std::uint8_t flip : {0x01, 0x80}) {
            std::vector<std::uint8_t> bad = bytes;
            bad[pos] ^= flip;
            try {
                decode_complex_image(bad.data(), bad.size());
            } catch (const FormatError&) {
                // expected for structural damage
            }
        }
    }
}

TEST_CASE("checkpoint round trip is bit-exact and byte-stable") {
    const auto dir = temp_dir();
    Checkpoint ck = tiny_checkpoint(3);
    const std::string p1 = (dir / "a.ddck").string();
    save_checkpoint(p1, ck);
    Checkpoint back = load_checkpoint(p1);
    CHECK(back.config_text == ck.config_text);
    CHECK(back.steps_done == ck.steps_done);
    CHECK(back.epochs_done == ck.epochs_done);
    CHECK(back.optim.step == ck.optim.step);
    CHECK(back.optim.hyper.lr == ck.optim.hyper.lr);

    const std::string p2 = (dir / "b.ddck").string();
    save_checkpoint(p2, back);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint corruption and truncation raise typed errors") {
    const auto dir = temp_dir();
    Checkpoint ck = tiny_checkpoint(4);
    const std::string p = (dir / "fuzz.ddck").string();
    save_checkpoint(p, ck);
    const std::vector<std::uint8_t> bytes = slurp(p);

    Rng rng(5);
    int failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t cut = rng.below(bytes.size());
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
        const std::string tp = (dir / "trunc.ddck").string();
        atomic_write_file(tp, part);
        try {
            load_checkpoint(tp);
        } catch (const FormatError&) {
            ++failures;
        }
    }
    CHECK(failures == 200);

    // flipping a config byte breaks the digest
    std::vector<std::uint8_t> bad = bytes;
    bad[4 + 4 + 8 + 4] ^= 0x01;  // first config byte
    const std::string bp = (dir / "bad.ddck").string();
    atomic_write_file(bp, bad);
    CHECK_THROWS_AS(load_checkpoint(bp), FormatError);
}

TEST_CASE("pgm export scales to the full 16-bit range") {
    const auto dir = temp_dir();
    RealTensor img({2, 2}, {0.0, 1.0, 1.0, 0.0});
    const std::string p = (dir / "img.pgm").string();
    export_pgm(img, p);
    const std::vector<std::uint8_t> bytes = slurp(p);

    const std::string header(bytes.begin(), bytes.begin() + 12);
    CHECK(header == "P5\n2 2\n65535");
    REQUIRE(bytes.size() == 13 + 8);
    const std::uint8_t* px = bytes.data() + 13;
    CHECK((px[0] << 8 | px[1]) == 0);
    CHECK((px[2] << 8 | px[3]) == 65535);
    CHECK((px[4] << 8 | px[5]) == 65535);
    CHECK((px[6] << 8 | px[7]) == 0);

    RealTensor flat({2, 2});
    flat.fill(3.0);
    const std::string pf = (dir / "flat.pgm").string();
    export_pgm(flat, pf);
    const std::vector<std::uint8_t> fb = slurp(pf);
    for (std::size_t i = 13; i < fb.size(); ++i) CHECK(fb[i] == 0);
}

TEST_CASE("dataset save/load round trip with manifest") {
    const auto dir = (temp_dir() / "ds").string();
    std::filesystem::remove_all(dir);
    auto cases = generate_dataset(3, 8, 8, 2, 0.1, Rng(6));
    save_dataset(dir, cases, {{"n", "3"}, {"seed", "6"}});
    StoredDataset ds = load_dataset(dir);
    REQUIRE(ds.cases.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(ds.cases[i].k_full.size() == cases[i].k_full.size());
        for (std::size_t j = 0; j < cases[i].k_full.size(); ++j)
            REQUIRE(ds.cases[i].k_full[j] == cases[i].k_full[j]);
    }
    bool has_seed = false;
    for (const auto& [k, v] : ds.config)
        if (k == "seed" && v == "6") has_seed = true;
    CHECK(has_seed);
}

TEST_CASE("fnv1a64 reference values") {
    // standard FNV-1a test vectors
    CHECK(fnv1a64("") == 0xCBF29CE484222325ULL);
    CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
}

}  // TEST_SUITE
