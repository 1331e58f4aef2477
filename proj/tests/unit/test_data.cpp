#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "../support/metrics_oracle.hpp"
#include "../support/temp_dir.hpp"
#include "../support/test_util.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "metrics.hpp"
#include "phantom.hpp"
#include "volume.hpp"

using namespace aepnet;
using testutil::max_abs_diff;
using testutil::random_tensor;
using testutil::TempDir;

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

/// Full aligned sample for a degraded phantom mask; error map and boundary
/// derived from the mask so alignment checks can recompute them.
CaseSample sample_of(std::uint64_t seed, const Shape& dims, int num_classes, double severity) {
  Phantom ph = gen_phantom(seed, dims, num_classes);
  CaseSample s;
  s.image = ph.image;
  s.gt = ph.gt;
  s.mask = degrade_mask(ph.gt, severity, seed + 1, num_classes);
  s.error_map = make_error_map(s.mask, s.gt);
  s.boundary = Tensor::zeros(dims);
  Rng rng(seed + 2);
  for (std::size_t i = 0; i < s.boundary.numel(); ++i) s.boundary[i] = rng.uniform(0.0, 1.0);
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("volumes round trip through files and reject malformed ones") {
  TempDir dir("volume");
  Rng rng(11);

  SUBCASE("f32 rank-3 values survive exactly once representable") {
    Tensor t = Tensor::zeros({3, 4, 5});
    for (std::size_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<double>(static_cast<float>(rng.uniform(-2.0, 2.0)));
    write_volume(dir.file("vol.rvol"), t, VolDtype::f32);
    Tensor r = read_volume(dir.file("vol.rvol"));
    CHECK(r.shape == Shape{3, 4, 5});
    CHECK(same_values(r, t));
  }

  SUBCASE("f32 widens through float on the way out") {
    Tensor t = Tensor::full({2, 2, 2}, 0.1);  // 0.1 is not an f32 value
    write_volume(dir.file("vol.rvol"), t, VolDtype::f32);
    Tensor r = read_volume(dir.file("vol.rvol"));
    CHECK(r[0] == static_cast<double>(static_cast<float>(0.1)));
    CHECK(r[0] != 0.1);
  }

  SUBCASE("u8 labels round trip exactly") {
    Tensor t = Tensor::zeros({4, 3, 2});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_int(256);
    write_volume(dir.file("lab.rvol"), t, VolDtype::u8);
    CHECK(same_values(read_volume(dir.file("lab.rvol")), t));
  }

  SUBCASE("rank-4 multi-channel volumes keep their shape") {
    Tensor t = Tensor::zeros({2, 3, 4, 5});
    for (std::size_t i = 0; i < t.numel(); ++i)
      t[i] = static_cast<double>(static_cast<float>(rng.uniform(0.0, 1.0)));
    write_volume(dir.file("ch.rvol"), t, VolDtype::f32);
    Tensor r = read_volume(dir.file("ch.rvol"));
    CHECK(r.shape == Shape{2, 3, 4, 5});
    CHECK(same_values(r, t));
  }

  SUBCASE("header states shape, dtype, layout, and payload name") {
    Tensor t = Tensor::zeros({3, 4, 5});
    write_volume(dir.file("hdr.rvol"), t, VolDtype::f32);
    std::string h = slurp(dir.file("hdr.rvol"));
    CHECK(h ==
          "RVOL 1\n"
          "dims: 3 4 5\n"
          "channels: 1\n"
          "dtype: f32\n"
          "byteorder: little-endian\n"
          "order: row-major\n"
          "payload: hdr.bin\n");
  }

  SUBCASE("u8 rejects non-integral and out-of-range values") {
    CHECK_THROWS_AS(write_volume(dir.file("bad.rvol"), Tensor::full({2, 2, 2}, 0.5), VolDtype::u8),
                    std::invalid_argument);
    CHECK_THROWS_AS(write_volume(dir.file("bad.rvol"), Tensor::full({2, 2, 2}, 256.0), VolDtype::u8),
                    std::invalid_argument);
    CHECK_THROWS_AS(write_volume(dir.file("bad.rvol"), Tensor::full({2, 2, 2}, -1.0), VolDtype::u8),
                    std::invalid_argument);
  }

  SUBCASE("truncated payload names expected and actual byte counts") {
    Tensor t = Tensor::zeros({2, 2, 2});
    write_volume(dir.file("cut.rvol"), t, VolDtype::f32);
    std::filesystem::resize_file(dir.file("cut.bin"), 17);
    std::string msg;
    try {
      read_volume(dir.file("cut.rvol"));
    } catch (const std::runtime_error& e) {
      msg = e.what();
    }
    CHECK(msg.find("32") != std::string::npos);  // expected 8 voxels * 4 bytes
    CHECK(msg.find("17") != std::string::npos);
  }

  SUBCASE("bad magic, unknown dtype, unknown key, and missing payload all fail") {
    auto write_header = [&](const std::string& body) {
      std::ofstream out(dir.file("craft.rvol"), std::ios::trunc);
      out << body;
    };
    std::ofstream(dir.file("craft.bin"), std::ios::binary) << std::string(8, '\0');
    const std::string good =
        "dims: 2 1 1\nchannels: 1\ndtype: f32\nbyteorder: little-endian\n"
        "order: row-major\npayload: craft.bin\n";
    write_header("QVOL 1\n" + good);
    CHECK_THROWS(read_volume(dir.file("craft.rvol")));
    write_header("RVOL 1\ndims: 2 1 1\nchannels: 1\ndtype: f64\nbyteorder: little-endian\n"
                 "order: row-major\npayload: craft.bin\n");
    CHECK_THROWS(read_volume(dir.file("craft.rvol")));
    write_header("RVOL 1\nflavor: mint\n" + good);
    CHECK_THROWS(read_volume(dir.file("craft.rvol")));
    write_header("RVOL 1\n" + good);
    CHECK_NOTHROW(read_volume(dir.file("craft.rvol")));  // the crafted header itself is fine
    std::filesystem::remove(dir.file("craft.bin"));
    CHECK_THROWS(read_volume(dir.file("craft.rvol")));
    CHECK_THROWS(read_volume(dir.file("absent.rvol")));
  }
}

TEST_CASE("phantoms are deterministic with well-populated, well-separated classes") {
  const Shape dims{16, 16, 16};
  const int C = 4;

  SUBCASE("same seed reproduces bit-identical volumes, different seeds differ") {
    Phantom a = gen_phantom(42, dims, C);
    Phantom b = gen_phantom(42, dims, C);
    CHECK(same_values(a.image, b.image));
    CHECK(same_values(a.gt, b.gt));
    Phantom c = gen_phantom(43, dims, C);
    CHECK_FALSE(same_values(a.image, c.image));
  }

  SUBCASE("labels are integral and every foreground class holds at least 1% of voxels") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
      Phantom ph = gen_phantom(seed, dims, C);
      std::vector<int> count(C, 0);
      for (std::size_t i = 0; i < ph.gt.numel(); ++i) {
        double v = ph.gt[i];
        REQUIRE(v == std::floor(v));
        REQUIRE(v >= 0.0);
        REQUIRE(v < C);
        ++count[static_cast<int>(v)];
      }
      const double n = static_cast<double>(ph.gt.numel());
      for (int k = 1; k < C; ++k) CHECK(count[k] >= 0.01 * n);
    }
  }

  SUBCASE("nominal class means sit at least two noise sigmas apart") {
    CHECK(class_mean(0, 4) == 0.1);
    CHECK(class_mean(3, 4) == doctest::Approx(0.9).epsilon(1e-15));
    for (int C2 : {2, 3, 4, 8, 16}) {
      for (int k = 0; k + 1 < C2; ++k) {
        double gap = class_mean(k + 1, C2) - class_mean(k, C2);
        CHECK(gap == doctest::Approx(0.8 / (C2 - 1)).epsilon(1e-12));
        CHECK(2.0 * noise_sigma(C2) <= gap + 1e-12);
      }
    }
    CHECK(noise_sigma(4) == 0.05);
    CHECK(noise_sigma(16) == 0.4 / 15);
  }

  SUBCASE("measured per-class image means are ordered and separated") {
    Phantom ph = gen_phantom(7, {32, 32, 32}, C);
    std::vector<double> sum(C, 0.0);
    std::vector<int> count(C, 0);
    for (std::size_t i = 0; i < ph.gt.numel(); ++i) {
      int k = static_cast<int>(ph.gt[i]);
      sum[k] += ph.image[i];
      ++count[k];
    }
    for (int k = 0; k + 1 < C; ++k) {
      REQUIRE(count[k] > 0);
      REQUIRE(count[k + 1] > 0);
      double lo = sum[k] / count[k], hi = sum[k + 1] / count[k + 1];
      CHECK(hi - lo > 2.0 * noise_sigma(C));
    }
  }

  SUBCASE("bad arguments are rejected") {
    CHECK_THROWS_AS(gen_phantom(1, {8, 16, 16}, C), std::invalid_argument);
    CHECK_THROWS_AS(gen_phantom(1, {16, 16}, C), std::invalid_argument);
    CHECK_THROWS_AS(gen_phantom(1, dims, 1), std::invalid_argument);
  }
}

TEST_CASE("degradation is exact at severity zero and deterministic") {
  const int C = 4;
  for (std::uint64_t seed : {1, 5, 9}) {
    Phantom ph = gen_phantom(seed, {16, 16, 16}, C);
    Tensor same = degrade_mask(ph.gt, 0.0, 1234 + seed, C);
    CHECK(same_values(same, ph.gt));

    Tensor a = degrade_mask(ph.gt, 0.6, 77 + seed, C);
    Tensor b = degrade_mask(ph.gt, 0.6, 77 + seed, C);
    CHECK(same_values(a, b));
    CHECK_FALSE(same_values(a, ph.gt));
    for (std::size_t i = 0; i < a.numel(); ++i) {
      REQUIRE(a[i] == std::floor(a[i]));
      REQUIRE(a[i] >= 0.0);
      REQUIRE(a[i] < C);
    }
  }
  Phantom ph = gen_phantom(3, {16, 16, 16}, C);
  CHECK_THROWS_AS(degrade_mask(ph.gt, 1.5, 1, C), std::invalid_argument);
  CHECK_THROWS_AS(degrade_mask(ph.gt, -0.1, 1, C), std::invalid_argument);
}

TEST_CASE("degraded quality falls with severity") {
  const Shape dims{32, 32, 32};
  const int C = 4;

  SUBCASE("severity 1 drops expected quality below 0.6") {
    double sum = 0.0;
    for (int k = 0; k < 50; ++k) {
      Phantom ph = gen_phantom(11000 + k, dims, C);
      sum += seg_quality(degrade_mask(ph.gt, 1.0, 999 + 7 * k, C), ph.gt, C).dsc;
    }
    CHECK(sum / 50 < 0.6);
  }

  SUBCASE("severity and quality are strongly rank-anticorrelated") {
    Rng rng(42);
    std::vector<double> sev, dsc;
    for (int k = 0; k < 100; ++k) {
      double s = rng.uniform(0.0, 1.0);
      Phantom ph = gen_phantom(7000 + k, dims, C);
      sev.push_back(s);
      dsc.push_back(seg_quality(degrade_mask(ph.gt, s, 111 + 13 * k, C), ph.gt, C).dsc);
    }
    CHECK(testutil::spearman_ref(sev, dsc) <= -0.8);
  }
}

TEST_CASE("error maps mark exactly the disagreeing voxels") {
  Tensor a = Tensor::zeros({3, 3, 3});
  Tensor b = Tensor::zeros({3, 3, 3});
  Rng rng(5);
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] = b[i] = rng.uniform_int(4);

  Tensor ones = make_error_map(a, b);
  for (std::size_t i = 0; i < ones.numel(); ++i) CHECK(ones[i] == 1.0);

  b[13] = a[13] == 0.0 ? 1.0 : 0.0;
  Tensor em = make_error_map(a, b);
  for (std::size_t i = 0; i < em.numel(); ++i) CHECK(em[i] == (i == 13 ? 0.0 : 1.0));
  CHECK(same_values(em, make_error_map(b, a)));

  CHECK_THROWS_AS(make_error_map(a, Tensor::zeros({3, 3, 2})), std::invalid_argument);
}

TEST_CASE("one-hot encoding is exact and invertible") {
  const int C = 5;
  Tensor labels = Tensor::zeros({4, 3, 2});
  Rng rng(8);
  for (std::size_t i = 0; i < labels.numel(); ++i) labels[i] = rng.uniform_int(C);

  Tensor oh = one_hot(labels, C);
  REQUIRE(oh.shape == Shape{C, 4, 3, 2});
  const std::size_t n = labels.numel();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    int argmax = 0;
    for (int c = 0; c < C; ++c) {
      double v = oh[c * n + i];
      CHECK((v == 0.0 || v == 1.0));
      sum += v;
      if (v == 1.0) argmax = c;
    }
    CHECK(sum == 1.0);
    CHECK(argmax == static_cast<int>(labels[i]));
  }

  SUBCASE("two classes stack the map and its complement") {
    Tensor bin = Tensor::zeros({2, 2, 2});
    for (std::size_t i = 0; i < bin.numel(); ++i) bin[i] = i % 2;
    Tensor oh2 = one_hot(bin, 2);
    for (std::size_t i = 0; i < bin.numel(); ++i) {
      CHECK(oh2[bin.numel() + i] == bin[i]);
      CHECK(oh2[i] == 1.0 - bin[i]);
    }
  }

  CHECK_THROWS_AS(one_hot(Tensor::full({2, 2, 2}, 5.0), C), std::invalid_argument);
  CHECK_THROWS_AS(one_hot(Tensor::full({2, 2, 2}, 0.5), C), std::invalid_argument);
}

TEST_CASE("preprocessing hits 0 and 1 exactly and shrugs off affine intensity changes") {
  Rng rng(21);
  Tensor x = random_tensor(rng, {6, 5, 4}, -3.0, 7.0);
  Tensor p = preprocess(x);

  double mn = 1e300, mx = -1e300;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    mn = std::min(mn, p[i]);
    mx = std::max(mx, p[i]);
  }
  CHECK(mn == 0.0);
  CHECK(mx == 1.0);

  SUBCASE("power-of-two rescaling is bit-exact, general affine to 1e-12") {
    Tensor doubled = x.detached();
    for (std::size_t i = 0; i < doubled.numel(); ++i) doubled[i] = 2.0 * x[i];
    CHECK(same_values(preprocess(doubled), p));

    Tensor affine = x.detached();
    for (std::size_t i = 0; i < affine.numel(); ++i) affine[i] = 3.7 * x[i] - 1.2;
    CHECK(max_abs_diff(preprocess(affine), p) < 1e-12);
  }

  SUBCASE("constant volumes map to all 0.5") {
    Tensor flat = preprocess(Tensor::full({3, 3, 3}, 4.2));
    for (std::size_t i = 0; i < flat.numel(); ++i) CHECK(flat[i] == 0.5);
  }
}

TEST_CASE("random crops stay aligned and pad with agreement") {
  CaseSample s = sample_of(31, {16, 16, 16}, 4, 0.5);

  SUBCASE("full-size crop is the identity") {
    Rng rng(1);
    CaseSample c = random_crop(s, {16, 16, 16}, rng);
    CHECK(same_values(c.image, s.image));
    CHECK(same_values(c.gt, s.gt));
    CHECK(same_values(c.mask, s.mask));
    CHECK(same_values(c.error_map, s.error_map));
    CHECK(same_values(c.boundary, s.boundary));
  }

  SUBCASE("the cropped error map is the error map of the cropped volumes") {
    for (std::uint64_t seed : {2, 3, 4, 5}) {
      Rng rng(seed);
      CaseSample c = random_crop(s, {8, 8, 8}, rng);
      CHECK(c.mask.shape == Shape{8, 8, 8});
      CHECK(same_values(c.error_map, make_error_map(c.mask, c.gt)));
    }
  }

  SUBCASE("identical generator state gives identical crops") {
    Rng r1(9), r2(9);
    CaseSample a = random_crop(s, {8, 8, 8}, r1);
    CaseSample b = random_crop(s, {8, 8, 8}, r2);
    CHECK(same_values(a.image, b.image));
    CHECK(same_values(a.error_map, b.error_map));
  }

  SUBCASE("short extents pad labels with 0, errors with 1, boundary with 0") {
    Rng rng(4);
    CaseSample c = random_crop(s, {20, 16, 16}, rng);
    REQUIRE(c.image.shape == Shape{20, 16, 16});
    // the original sits at offset 0, so [16,20) in depth is padding
    for (int d = 16; d < 20; ++d)
      for (int h = 0; h < 16; h += 5)
        for (int w = 0; w < 16; w += 5) {
          std::size_t i = (static_cast<std::size_t>(d) * 16 + h) * 16 + w;
          CHECK(c.image[i] == 0.0);
          CHECK(c.gt[i] == 0.0);
          CHECK(c.mask[i] == 0.0);
          CHECK(c.error_map[i] == 1.0);
          CHECK(c.boundary[i] == 0.0);
        }
    // and the original region is untouched
    for (std::size_t i = 0; i < 16 * 16 * 16; ++i) CHECK(c.image[i] == s.image[i]);
    CHECK(same_values(c.error_map, make_error_map(c.mask, c.gt)));
  }

  Rng rng(1);
  CHECK_THROWS_AS(random_crop(s, {0, 8, 8}, rng), std::invalid_argument);
}

TEST_CASE("mirror flips are joint, self-inverse, and per-axis fair coins") {
  CaseSample s = sample_of(17, {16, 16, 16}, 3, 0.4);

  SUBCASE("flipping twice with the same coins restores the sample") {
    Rng r1(55), r2(55);
    CaseSample once = mirror_flip(s, true, true, true, r1);
    CaseSample twice = mirror_flip(once, true, true, true, r2);
    CHECK(same_values(twice.image, s.image));
    CHECK(same_values(twice.gt, s.gt));
    CHECK(same_values(twice.mask, s.mask));
    CHECK(same_values(twice.error_map, s.error_map));
    CHECK(same_values(twice.boundary, s.boundary));
  }

  SUBCASE("the flipped error map is the error map of the flipped volumes") {
    for (std::uint64_t seed : {1, 2, 3, 4, 5, 6, 7, 8}) {
      Rng rng(seed);
      CaseSample f = mirror_flip(s, true, true, true, rng);
      CHECK(same_values(f.error_map, make_error_map(f.mask, f.gt)));
    }
  }

  // A 2x2x2 probe whose voxel value encodes its coordinates: flips decode
  // additively from the value landing at linear index 0.
  CaseSample probe;
  probe.image = Tensor::zeros({2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) probe.image[i] = static_cast<double>(i);
  probe.gt = probe.mask = probe.image;
  probe.error_map = Tensor::full({2, 2, 2}, 1.0);
  probe.boundary = Tensor::zeros({2, 2, 2});
  auto decode = [](const CaseSample& f) {
    int v = static_cast<int>(f.image[0]);
    return std::array<bool, 3>{(v & 1) != 0, (v & 2) != 0, (v & 4) != 0};  // x, y, z
  };

  SUBCASE("coins are drawn in x, y, z order and only for listed axes") {
    Rng r1(123), r2(123);
    auto fl = decode(mirror_flip(probe, false, false, true, r1));
    bool coin = r2.bernoulli(0.5);  // only one coin is spent
    CHECK(fl[0] == false);
    CHECK(fl[1] == false);
    CHECK(fl[2] == coin);
    CHECK(r1.next_u64() == r2.next_u64());

    Rng r3(77), r4(77);
    auto all = decode(mirror_flip(probe, true, true, true, r3));
    bool cx = r4.bernoulli(0.5), cy = r4.bernoulli(0.5), cz = r4.bernoulli(0.5);
    CHECK(all[0] == cx);
    CHECK(all[1] == cy);
    CHECK(all[2] == cz);
  }

  SUBCASE("each listed axis flips about half the time") {
    int hits[3] = {0, 0, 0};
    for (int k = 0; k < 10000; ++k) {
      Rng rng(static_cast<std::uint64_t>(k));
      auto fl = decode(mirror_flip(probe, true, true, true, rng));
      for (int ax = 0; ax < 3; ++ax) hits[ax] += fl[ax] ? 1 : 0;
    }
    for (int ax = 0; ax < 3; ++ax) {
      CHECK(hits[ax] > 4800);
      CHECK(hits[ax] < 5200);
    }
  }
}

TEST_SUITE_END();
