#include <doctest.h>

#include <cmath>

#include "khelm/error.hpp"
#include "khelm/serialization.hpp"
#include "khelm/timeseries.hpp"
#include "test_helpers.hpp"

using namespace khelm;
using khelm::testing::scratch_dir;
using khelm::testing::write_file;

TEST_CASE("load_series reads rows and columns orientations") {
  const auto dir = scratch_dir("ts_load");
  write_file(dir / "a.csv", "1,2,3,4\n5,6,7,8\n9,10,11,12\n");
  const auto rows = load_series(dir / "a.csv", Orientation::rois_as_rows);
  CHECK(rows.roi_count() == 3);
  CHECK(rows.length() == 4);
  CHECK(rows.values()(1, 2) == 7.0);

  const auto cols = load_series(dir / "a.csv", Orientation::rois_as_columns);
  CHECK(cols.roi_count() == 4);
  CHECK(cols.length() == 3);
  CHECK(cols.values() == rows.values().transpose());
}

TEST_CASE("load_series skips a header row and comment lines") {
  const auto dir = scratch_dir("ts_header");
  write_file(dir / "h.csv", "# made by hand\nt1,t2,t3\n1,2,3\n4,5,6\n");
  const auto s = load_series(dir / "h.csv");
  CHECK(s.roi_count() == 2);
  CHECK(s.length() == 3);
}

TEST_CASE("load_series error cases") {
  const auto dir = scratch_dir("ts_errors");

  SUBCASE("non-numeric cell carries 1-based coordinates") {
    write_file(dir / "p.csv", "1,2,3,4\n5,6,abc,8\n");
    try {
      load_series(dir / "p.csv");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.row() == 2);
      CHECK(e.col() == 3);
    }
  }
  SUBCASE("ragged rows") {
    write_file(dir / "r.csv", "1,2,3\n4,5\n");
    try {
      load_series(dir / "r.csv");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.row() == 2);
    }
  }
  SUBCASE("empty file") {
    write_file(dir / "e.csv", "");
    CHECK_THROWS_AS(load_series(dir / "e.csv"), EmptyInputError);
  }
  SUBCASE("header only") {
    write_file(dir / "h.csv", "a,b,c\n");
    CHECK_THROWS_AS(load_series(dir / "h.csv"), EmptyInputError);
  }
  SUBCASE("single time point") {
    write_file(dir / "one.csv", "1\n2\n");
    CHECK_THROWS_AS(load_series(dir / "one.csv"), DimensionError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_series(dir / "nope.csv"), Error);
  }
}

TEST_CASE("save then load round-trips bit-exactly") {
  const auto dir = scratch_dir("ts_roundtrip");
  Rng rng(11);
  Eigen::MatrixXd m = khelm::testing::random_normal(4, 17, rng);
  m(0, 0) = 1e-300;
  m(1, 1) = -123456789.123456789;
  m(2, 2) = 0.1 + 0.2;
  const RoiTimeSeries s(m);
  save_series(dir / "s.csv", s);
  const auto back = load_series(dir / "s.csv");
  CHECK(back.values() == m);
}

TEST_CASE("standardize") {
  SUBCASE("row (1,2,3)") {
    Eigen::MatrixXd m(1, 3);
    m << 1, 2, 3;
    const auto z = standardize(RoiTimeSeries(m)).values();
    CHECK(z(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(z(0, 1) == doctest::Approx(0.0));
    CHECK(z(0, 2) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("constant row becomes zeros") {
    Eigen::MatrixXd m(2, 3);
    m << 5, 5, 5, 1, 2, 4;
    const auto z = standardize(RoiTimeSeries(m)).values();
    CHECK(z.row(0).isZero(0.0));
  }
  SUBCASE("random 5x100 moments and idempotence") {
    Rng rng(3);
    Eigen::MatrixXd m = 3.0 * khelm::testing::random_normal(5, 100, rng);
    m.array() += 7.0;
    const auto z = standardize(RoiTimeSeries(m));
    for (Eigen::Index i = 0; i < 5; ++i) {
      const double mean = z.values().row(i).mean();
      double ss = 0.0;
      for (Eigen::Index t = 0; t < 100; ++t) ss += (z.values()(i, t) - mean) * (z.values()(i, t) - mean);
      CHECK(std::abs(mean) < 1e-12);
      CHECK(std::abs(std::sqrt(ss / 99.0) - 1.0) < 1e-12);
    }
    const auto twice = standardize(z);
    CHECK((twice.values() - z.values()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("SyntheticCohortSpec validation names the field") {
  SyntheticCohortSpec spec;
  spec.length = 50;
  spec.change_points_class_b = {10, 51};
  try {
    spec.validate();
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(std::string(e.what()).find("change_points_class_b") != std::string::npos);
  }
  spec.change_points_class_b = {20, 10};
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec.change_points_class_b = {1};
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec.change_points_class_b = {2, 50};
  CHECK_NOTHROW(spec.validate());
  spec.noise_scale = 0.0;
  CHECK_THROWS_AS(spec.validate(), SpecError);
  spec.noise_scale = 1.0;
  spec.covariance_perturbation = 1.5;
  CHECK_THROWS_AS(spec.validate(), SpecError);
}

TEST_CASE("generate_synthetic") {
  SUBCASE("null spec gives single-block ground truth") {
    SyntheticCohortSpec spec;
    spec.subjects_per_class = 3;
    spec.length = 40;
    const auto cohort = generate_synthetic(spec, 5);
    REQUIRE(cohort.subjects.size() == 6);
    for (const auto& mask : cohort.truth.masks) {
      CHECK(mask.change_points() == std::vector<int>{1});
      CHECK(mask.length() == 40);
    }
    CHECK(cohort.truth.labels.front() == -1);
    CHECK(cohort.truth.labels.back() == 1);
  }
  SUBCASE("determinism and independence from the job count") {
    SyntheticCohortSpec spec;
    spec.subjects_per_class = 4;
    spec.length = 60;
    spec.change_points_class_a = {30};
    spec.covariance_perturbation = 0.5;
    spec.spatial_correlation = 0.4;
    const auto a = generate_synthetic(spec, 7, 1);
    const auto b = generate_synthetic(spec, 7, 3);
    for (std::size_t s = 0; s < a.subjects.size(); ++s) CHECK(a.subjects[s] == b.subjects[s]);
    const auto c = generate_synthetic(spec, 8, 1);
    CHECK_FALSE(a.subjects[0] == c.subjects[0]);
  }
  SUBCASE("mean shift magnitude is recovered on average") {
    SyntheticCohortSpec spec;
    spec.subjects_per_class = 25;
    spec.roi_count = 5;
    spec.length = 200;
    spec.change_points_class_a = {101};
    spec.change_points_class_b = {101};
    spec.mean_shift = 2.0;
    const auto cohort = generate_synthetic(spec, 99);
    double total = 0.0;
    for (const auto& s : cohort.subjects) {
      const Eigen::VectorXd before = s.values().leftCols(100).rowwise().mean();
      const Eigen::VectorXd after = s.values().rightCols(100).rowwise().mean();
      total += (after - before).norm();
    }
    const double average = total / static_cast<double>(cohort.subjects.size());
    CHECK(std::abs(average - 2.0) < 0.2 * 2.0);
  }
}

TEST_CASE("ground truth JSON round trip") {
  SyntheticCohortSpec spec;
  spec.subjects_per_class = 1;
  spec.length = 200;
  spec.change_points_class_b = {101};
  const auto cohort = generate_synthetic(spec, 1);
  const auto j = io::ground_truth_to_json(cohort.truth);
  CHECK(j.at("T") == 200);
  CHECK(j.at("subjects")[1].at("change_points") == nlohmann::json::parse("[1, 101]"));
  CHECK(j.at("subjects")[1].at("label") == 1);
  const auto back = io::ground_truth_from_json(j);
  CHECK(back.masks == cohort.truth.masks);
  CHECK(back.labels == cohort.truth.labels);
}

TEST_CASE("cohort spec JSON rejects unknown keys") {
  auto j = io::cohort_spec_to_json(SyntheticCohortSpec{});
  CHECK_NOTHROW(io::cohort_spec_from_json(j));
  j["colour"] = 3;
  CHECK_THROWS_AS(io::cohort_spec_from_json(j), ConfigError);
}
