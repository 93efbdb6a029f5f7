#include <cstring>
#include <filesystem>
#include <string>

#include <doctest.h>

#include "proxdiff/checkpoint.hpp"
#include "proxdiff/io.hpp"
#include "proxdiff/rng.hpp"

using namespace proxdiff;
namespace fs = std::filesystem;

namespace {

// Byte layout of the fixed-size header, for surgical corruption:
//   0..7 magic, 8..11 version, 12 kind, 13..36 six int32 descriptor fields.
constexpr std::size_t kVersionOffset = 8;
constexpr std::size_t kWidthOffset = 21;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "proxdiff-ckpt-tests";
  fs::create_directories(dir);
  return dir / name;
}

Net small_net(NetKind kind, std::uint64_t seed) {
  ArchDescriptor arch;
  arch.kind = kind;
  arch.dim = 2;
  arch.num_labels = 3;
  arch.width = 16;
  arch.depth = 2;
  arch.embed_dim = 4;
  arch.fourier = 2;
  ModelMeta meta;
  meta.schedule.beta_min = 0.2;
  meta.schedule.beta_max = 15.0;
  meta.t_min = 5e-3;
  meta.step_grid = {3, 7};
  Net net = Net::make(arch, meta, seed);
  CounterRng rng({0x636b7074u, seed});
  for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()(i) += 0.1 * rng.normal();
  return net;
}

// Rewrites the trailing checksum so deliberate header edits stay "valid".
void refresh_checksum(std::string& bytes) {
  const std::uint64_t sum = fnv1a64(bytes.data(), bytes.size() - 8);
  std::memcpy(bytes.data() + bytes.size() - 8, &sum, 8);
}

CheckpointError::Kind load_failure(const std::string& path) {
  try {
    load_checkpoint(path);
  } catch (const CheckpointError& e) {
    return e.kind;
  }
  FAIL("expected a CheckpointError");
  return CheckpointError::Kind::Io;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("round trip is bit-identical") {
  const Net net = small_net(NetKind::Prox, 3);
  const fs::path path = temp_file("roundtrip.ckpt");
  save_checkpoint(net, path.string());
  const Net back = load_checkpoint(path.string());

  CHECK(back.arch() == net.arch());
  CHECK(back.meta().schedule.beta_min == net.meta().schedule.beta_min);
  CHECK(back.meta().schedule.beta_max == net.meta().schedule.beta_max);
  CHECK(back.meta().t_min == net.meta().t_min);
  CHECK(back.meta().step_grid == net.meta().step_grid);
  REQUIRE(back.param_count() == net.param_count());
  CHECK((back.params() - net.params()).cwiseAbs().maxCoeff() == 0.0);

  // Identical parameters imply identical forward outputs.
  CounterRng rng({0x636b6677u, 1});
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = rng.normal_vec(2);
    const double t = rng.uniform01();
    const double lam = 0.5 + rng.uniform01();
    const ConditionToken c = ConditionToken::label(rng.uniform_int(3));
    const Eigen::VectorXd a = net.prox_forward(x, t, lam, c);
    const Eigen::VectorXd bvec = back.prox_forward(x, t, lam, c);
    CHECK((a - bvec).cwiseAbs().maxCoeff() == 0.0);
  }
  fs::remove(path);
}

TEST_CASE("score checkpoints round trip too") {
  const Net net = small_net(NetKind::Score, 5);
  const fs::path path = temp_file("score.ckpt");
  save_checkpoint(net, path.string());
  const Net back = load_checkpoint_expect(path.string(), NetKind::Score);
  CHECK(back.arch() == net.arch());
  CHECK((back.params() - net.params()).cwiseAbs().maxCoeff() == 0.0);
  fs::remove(path);
}

TEST_CASE("expected-kind mismatch is a descriptor error") {
  const Net net = small_net(NetKind::Score, 7);
  const fs::path path = temp_file("kind.ckpt");
  save_checkpoint(net, path.string());
  try {
    load_checkpoint_expect(path.string(), NetKind::Prox);
    FAIL("expected a CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::Descriptor);
    CHECK(std::string(e.what()).find("score") != std::string::npos);
  }
  fs::remove(path);
}

TEST_CASE("missing file") {
  CHECK(load_failure((temp_file("") / "does-not-exist.ckpt").string()) ==
        CheckpointError::Kind::Io);
}

TEST_CASE("unwritable path") {
  const Net net = small_net(NetKind::Prox, 9);
  try {
    save_checkpoint(net, (temp_file("") / "no-such-dir" / "x.ckpt").string());
    FAIL("expected a CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind == CheckpointError::Kind::Io);
  }
}

TEST_CASE("corrupt files fail with distinct kinds") {
  const Net net = small_net(NetKind::Prox, 11);
  const fs::path path = temp_file("corrupt.ckpt");
  save_checkpoint(net, path.string());
  const std::string good = read_text_file(path.string());
  const fs::path bad = temp_file("corrupt-variant.ckpt");

  SUBCASE("foreign bytes") {
    write_text_file(bad.string(), "definitely,not,a,checkpoint\n1,2,3\n");
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Magic);
  }
  SUBCASE("file shorter than the magic") {
    write_text_file(bad.string(), good.substr(0, 5));
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Truncated);
  }
  SUBCASE("unsupported version") {
    std::string bytes = good;
    bytes[kVersionOffset] = 9;
    write_text_file(bad.string(), bytes);
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Version);
  }
  SUBCASE("truncated parameters") {
    write_text_file(bad.string(), good.substr(0, good.size() - 24));
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Truncated);
  }
  SUBCASE("trailing garbage") {
    write_text_file(bad.string(), good + "junk");
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Truncated);
  }
  SUBCASE("flipped parameter byte") {
    std::string bytes = good;
    bytes[bytes.size() - 24] = static_cast<char>(bytes[bytes.size() - 24] ^ 0x40);
    write_text_file(bad.string(), bytes);
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Checksum);
  }
  SUBCASE("descriptor disagrees with the parameter count") {
    // Change the stored width and re-sign the file: the parameter block no
    // longer matches what the descriptor implies.
    std::string bytes = good;
    std::int32_t width = 0;
    std::memcpy(&width, bytes.data() + kWidthOffset, 4);
    REQUIRE(width == 16);
    width = 24;
    std::memcpy(bytes.data() + kWidthOffset, &width, 4);
    refresh_checksum(bytes);
    write_text_file(bad.string(), bytes);
    CHECK(load_failure(bad.string()) == CheckpointError::Kind::Descriptor);
  }

  fs::remove(path);
  fs::remove(bad);
}

TEST_SUITE_END();
