#include "vprdb/metrics_eval.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "test_support.hpp"
#include "vprdb/errors.hpp"

using namespace vprdb;

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

FrameVoxelSet run_of_voxels(int start, int count) {
  FrameVoxelSet set;
  for (int i = 0; i < count; ++i) set.push_back({start + i, 0, 0});
  return set;
}

using test::random_unit_vector;

DescriptorSet one_hot_descriptors(const std::vector<int>& ids, std::size_t dim) {
  DescriptorSet set;
  set.dimension = dim;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> v(dim, 0.0);
    v[i % dim] = 1.0;
    set.vectors.emplace(ids[i], std::move(v));
  }
  return set;
}

}  // namespace

TEST_CASE("compute_stats on a full selection reports 100 percent coverage") {
  FrameVoxelSets frames;
  for (int k = 0; k < 4; ++k) {
    frames.frame_ids.push_back(k);
    frames.sets.push_back(run_of_voxels(3 * k, 5));
  }
  DatabaseSelection all;
  all.db_positions = {0, 1, 2, 3};

  const DatabaseStats stats = compute_stats(all, frames, 4, 0);
  CHECK(stats.sequence_size == 4);
  CHECK(stats.db_size == 4);
  CHECK(stats.reduction_rate == 1.0);
  CHECK(stats.spatial_coverage_percent == 100.0);
  CHECK(stats.excluded_frames == 0);
}

TEST_CASE("compute_stats measures db coverage against the union map") {
  FrameVoxelSets frames;
  frames.frame_ids = {0, 1};
  frames.sets = {run_of_voxels(0, 10), run_of_voxels(5, 10)};  // union 15 voxels
  DatabaseSelection one;
  one.db_positions = {0};

  const DatabaseStats stats = compute_stats(one, frames, 2, 3);
  CHECK(stats.db_size == 1);
  CHECK(stats.reduction_rate == 2.0);
  CHECK(stats.spatial_coverage_percent == doctest::Approx(100.0 * 10.0 / 15.0).epsilon(1e-15));
  CHECK(stats.excluded_frames == 3);
}

TEST_CASE("compute_stats rejects degenerate inputs") {
  FrameVoxelSets frames;
  frames.frame_ids = {0};
  frames.sets = {run_of_voxels(0, 3)};

  CHECK_THROWS_AS(compute_stats(DatabaseSelection{}, frames, 1, 0), InternalError);

  FrameVoxelSets empty_map;
  empty_map.frame_ids = {0};
  empty_map.sets = {{}};
  DatabaseSelection one;
  one.db_positions = {0};
  CHECK_THROWS_AS(compute_stats(one, empty_map, 1, 0), InternalError);
}

TEST_CASE("reduction rates format as rounded multipliers") {
  CHECK(format_reduction_rate(960.0) == "x960");
  CHECK(format_reduction_rate(1400.0) == "x1400");
  CHECK(format_reduction_rate(205.0) == "x205");
  CHECK(format_reduction_rate(3547.0 / 14.0) == "x253");
  CHECK(format_reduction_rate(10952.0 / 102.0) == "x107");
  CHECK(format_reduction_rate(1.0) == "x1");
}

TEST_CASE("ground truth demands strictly more than the threshold") {
  CHECK_FALSE(ground_truth_match(0, 10, 0.3));
  CHECK(ground_truth_match(10, 10, 0.3));
  CHECK_FALSE(ground_truth_match(3, 10, 0.3));  // 0.3 is not > 0.3
  CHECK(ground_truth_match(4, 10, 0.3));
}

TEST_CASE("load_descriptors normalizes rows to unit length") {
  test::TempDir dir("desc");
  const auto path = dir.path() / "descriptors.txt";
  write_text(path,
             "# frame_id v1 v2 v3\n"
             "7 0.1 0.2 0.3\n"
             "\n"
             "9 0 0 2\n");
  const DescriptorSet set = load_descriptors(path);
  CHECK(set.dimension == 3);
  REQUIRE(set.vectors.size() == 2);

  const auto& v7 = set.vectors.at(7);
  const double norm = std::sqrt(std::inner_product(v7.begin(), v7.end(), v7.begin(), 0.0));
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-14));
  // Direction is preserved: components stay in ratio 1:2:3.
  CHECK(v7[1] == doctest::Approx(2.0 * v7[0]).epsilon(1e-14));
  CHECK(v7[2] == doctest::Approx(3.0 * v7[0]).epsilon(1e-14));

  CHECK(set.vectors.at(9) == std::vector<double>{0.0, 0.0, 1.0});
}

TEST_CASE("load_descriptors rejects malformed files") {
  test::TempDir dir("desc_bad");
  const auto path = dir.path() / "descriptors.txt";

  write_text(path, "1 0.1 0.2\n2 0.3\n");
  CHECK_THROWS_WITH_AS(load_descriptors(path), doctest::Contains("expected 2"), InputError);

  write_text(path, "1 0.1 0.2\n1 0.3 0.4\n");
  CHECK_THROWS_WITH_AS(load_descriptors(path), doctest::Contains("duplicate"), InputError);

  write_text(path, "1 0.1 nan\n");  // stream extraction already refuses nan/inf
  CHECK_THROWS_AS(load_descriptors(path), InputError);

  write_text(path, "1 0 0 0\n");
  CHECK_THROWS_WITH_AS(load_descriptors(path), doctest::Contains("zero"), InputError);

  write_text(path, "1 0.1 abc\n");
  CHECK_THROWS_AS(load_descriptors(path), InputError);

  write_text(path, "# nothing but comments\n");
  CHECK_THROWS_WITH_AS(load_descriptors(path), doctest::Contains("no descriptors"), InputError);

  CHECK_THROWS_AS(load_descriptors(dir.path() / "missing.txt"), InputError);
}

TEST_CASE("descriptor save and load round trip") {
  test::TempDir dir("desc_rt");
  const auto path = dir.path() / "descriptors.txt";

  std::mt19937_64 rng(42);
  DescriptorSet original;
  original.dimension = 6;
  for (int id = 0; id < 20; ++id) {
    original.vectors.emplace(id * 3, random_unit_vector(rng, 6));
  }
  save_descriptors(path, original);
  const DescriptorSet back = load_descriptors(path);

  CHECK(back.dimension == 6);
  REQUIRE(back.vectors.size() == 20);
  for (const auto& [id, v] : original.vectors) {
    const auto& w = back.vectors.at(id);
    for (std::size_t d = 0; d < 6; ++d) {
      // %.17g preserves the doubles exactly; reloading renormalizes an
      // already-unit vector, which can move components by at most one ulp.
      CHECK(w[d] == doctest::Approx(v[d]).epsilon(1e-15));
    }
  }
}

TEST_CASE("recall_at_k finds planted exact copies") {
  const std::vector<int> db = {0, 1, 2};
  const std::vector<int> queries = {10, 11, 12};
  DescriptorSet set = one_hot_descriptors(db, 3);
  for (int q = 10; q <= 12; ++q) {
    std::vector<double> v(3, 0.0);
    v[q - 10] = 1.0;
    set.vectors.emplace(q, std::move(v));
  }
  const auto is_match = [](int q, int d) { return q - 10 == d; };

  const RetrievalResult result = recall_at_k(db, queries, set, 1, is_match);
  CHECK(result.recall == 1.0);
  CHECK(result.evaluated_queries == 3);
  CHECK(result.recalled_queries == 3);
  CHECK(result.queries_without_gt == 0);
  REQUIRE(result.rows.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(result.rows[i].query_id == queries[i]);
    CHECK(result.rows[i].rank == 1);
    CHECK(result.rows[i].db_id == static_cast<int>(i));
    CHECK(result.rows[i].similarity == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(result.rows[i].correct);
  }
}

TEST_CASE("recall is 1 when k reaches the database size and ground truth exists") {
  std::mt19937_64 rng(7);
  const std::vector<int> db = {0, 1, 2, 3, 4};
  const std::vector<int> queries = {100, 101, 102};
  DescriptorSet set;
  set.dimension = 4;
  for (const int id : db) set.vectors.emplace(id, random_unit_vector(rng, 4));
  for (const int id : queries) set.vectors.emplace(id, random_unit_vector(rng, 4));
  const auto is_match = [](int q, int d) { return d == q % 5; };

  const RetrievalResult result = recall_at_k(db, queries, set, 5, is_match);
  CHECK(result.recall == 1.0);
  CHECK(result.rows.size() == 15);
  // Similarities are sorted non-increasing within each query.
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (result.rows[i].rank > 1) {
      CHECK(result.rows[i].similarity <= result.rows[i - 1].similarity);
    }
  }
}

TEST_CASE("recall is non-decreasing in k") {
  std::mt19937_64 rng(11);
  std::vector<int> db(8);
  std::iota(db.begin(), db.end(), 0);
  std::vector<int> queries(40);
  std::iota(queries.begin(), queries.end(), 1000);
  DescriptorSet set;
  set.dimension = 5;
  for (const int id : db) set.vectors.emplace(id, random_unit_vector(rng, 5));
  for (const int id : queries) set.vectors.emplace(id, random_unit_vector(rng, 5));
  const auto is_match = [](int q, int d) { return (q * 7 + 3) % 8 == d; };

  double previous = -1.0;
  for (const int k : {1, 2, 3, 5, 8}) {
    const RetrievalResult result = recall_at_k(db, queries, set, k, is_match);
    CHECK(result.recall >= previous);
    CHECK(result.evaluated_queries == 40);
    previous = result.recall;
  }
}

TEST_CASE("similarity ties rank the smaller db id first") {
  DescriptorSet set;
  set.dimension = 2;
  for (const int id : {5, 2, 9, 50}) {
    set.vectors.emplace(id, std::vector<double>{1.0, 0.0});
  }
  const RetrievalResult result =
      recall_at_k({5, 2, 9}, {50}, set, 3, [](int, int) { return true; });
  REQUIRE(result.rows.size() == 3);
  CHECK(result.rows[0].db_id == 2);
  CHECK(result.rows[1].db_id == 5);
  CHECK(result.rows[2].db_id == 9);
}

TEST_CASE("recall_at_k argument validation") {
  DescriptorSet set = one_hot_descriptors({0, 1}, 2);
  const auto yes = [](int, int) { return true; };

  CHECK_THROWS_AS(recall_at_k({0, 1}, {}, set, 0, yes), ConfigError);
  CHECK_THROWS_AS(recall_at_k({}, {}, set, 1, yes), InputError);
  CHECK_THROWS_AS(recall_at_k({0, 0}, {}, set, 1, yes), InputError);
  CHECK_THROWS_AS(recall_at_k({0, 3}, {}, set, 1, yes), InputError);   // 3 has no descriptor
  CHECK_THROWS_AS(recall_at_k({0, 1}, {3}, set, 1, yes), InputError);  // query without descriptor
}

TEST_CASE("queries with no true match are excluded from the denominator") {
  DescriptorSet set = one_hot_descriptors({0, 1, 10, 11}, 2);
  const RetrievalResult result =
      recall_at_k({0, 1}, {10, 11}, set, 1, [](int, int) { return false; });
  CHECK(result.evaluated_queries == 0);
  CHECK(result.recalled_queries == 0);
  CHECK(result.queries_without_gt == 2);
  CHECK(result.recall == 0.0);
  CHECK(result.rows.size() == 2);  // rows are still reported
}

TEST_CASE("recall against an independent random truth concentrates at 1/B") {
  // The correct database frame is drawn independently of the descriptors, so
  // P(top-1 == correct) is exactly 1/5 per query whatever the geometry.
  std::mt19937_64 rng(2026);
  const std::vector<int> db = {0, 1, 2, 3, 4};
  DescriptorSet set;
  set.dimension = 6;
  for (const int id : db) set.vectors.emplace(id, random_unit_vector(rng, 6));

  const int trials = 2000;
  std::vector<int> queries;
  std::vector<int> correct(trials + 100, 0);
  for (int t = 0; t < trials; ++t) {
    const int id = 100 + t;
    queries.push_back(id);
    set.vectors.emplace(id, random_unit_vector(rng, 6));
    correct[static_cast<std::size_t>(id)] = static_cast<int>(rng() % 5);
  }
  const auto is_match = [&](int q, int d) { return correct[static_cast<std::size_t>(q)] == d; };

  const RetrievalResult result = recall_at_k(db, queries, set, 1, is_match, 4);
  CHECK(result.evaluated_queries == trials);
  // sigma = sqrt(0.2 * 0.8 / 2000) = 0.008944; allow 3 sigma.
  CHECK(std::abs(result.recall - 0.2) <= 0.0269);
}

TEST_CASE("retrieval is independent of the thread count") {
  std::mt19937_64 rng(404);
  std::vector<int> db(10);
  std::iota(db.begin(), db.end(), 0);
  std::vector<int> queries(50);
  std::iota(queries.begin(), queries.end(), 500);
  DescriptorSet set;
  set.dimension = 7;
  for (const int id : db) set.vectors.emplace(id, random_unit_vector(rng, 7));
  for (const int id : queries) set.vectors.emplace(id, random_unit_vector(rng, 7));
  const auto is_match = [](int q, int d) { return (q + d) % 3 == 0; };

  const RetrievalResult base = recall_at_k(db, queries, set, 3, is_match, 1);
  for (const int threads : {2, 5, 8}) {
    const RetrievalResult other = recall_at_k(db, queries, set, 3, is_match, threads);
    CHECK(other.recall == base.recall);
    REQUIRE(other.rows.size() == base.rows.size());
    for (std::size_t i = 0; i < base.rows.size(); ++i) {
      CHECK(other.rows[i].query_id == base.rows[i].query_id);
      CHECK(other.rows[i].db_id == base.rows[i].db_id);
      CHECK(other.rows[i].similarity == base.rows[i].similarity);
    }
  }
}

TEST_CASE("finetune split sends ids divisible by five to validation") {
  FrameVoxelSets frames;
  ClassAssignment classes;
  ScanSequence sequence;
  for (int k = 0; k < 10; ++k) {
    frames.frame_ids.push_back(k);
    frames.sets.push_back(run_of_voxels(k, 2));
    classes.class_of.push_back(3);  // everyone assigned to frame 3
    classes.iou.push_back(0.5);
    FrameRecord frame;
    frame.id = k;
    frame.color_path = "color/" + std::to_string(k) + ".png";
    sequence.frames.push_back(frame);
  }

  const FinetuneSplit split = export_finetune_split(frames, classes, sequence);
  REQUIRE(split.validation.size() == 2);
  CHECK(split.validation[0].frame_id == 0);
  CHECK(split.validation[1].frame_id == 5);
  CHECK(split.train.size() == 8);
  for (const auto& entry : split.train) {
    CHECK(entry.frame_id % 5 != 0);
    CHECK(entry.class_db_id == 3);
    CHECK(entry.color_path == "color/" + std::to_string(entry.frame_id) + ".png");
  }

  // Train and validation partition the frames.
  std::set<int> seen;
  for (const auto& entry : split.train) seen.insert(entry.frame_id);
  for (const auto& entry : split.validation) seen.insert(entry.frame_id);
  CHECK(seen.size() == 10);

  ClassAssignment short_classes;
  short_classes.class_of = {0};
  short_classes.iou = {1.0};
  CHECK_THROWS_AS(export_finetune_split(frames, short_classes, sequence), InternalError);
}

TEST_CASE("finetune split maps class positions to external ids") {
  FrameVoxelSets frames;
  frames.frame_ids = {4, 6, 7};  // position 0 is frame 4
  frames.sets = {run_of_voxels(0, 1), run_of_voxels(1, 1), run_of_voxels(2, 1)};
  ClassAssignment classes;
  classes.class_of = {0, 0, 0};
  classes.iou = {1.0, 0.8, 0.7};
  ScanSequence sequence;

  const FinetuneSplit split = export_finetune_split(frames, classes, sequence);
  REQUIRE(split.train.size() == 3);
  CHECK(split.validation.empty());
  for (const auto& entry : split.train) {
    CHECK(entry.class_db_id == 4);
    CHECK(entry.color_path.empty());  // no such frame in the sequence
  }
}

TEST_CASE("golden retrieval csv bytes") {
  test::TempDir dir("retr_csv");
  const auto path = dir.path() / "retrieval.csv";

  RetrievalResult result;
  result.k = 2;
  result.rows.push_back({3, 1, 0, 1.0, true});
  result.rows.push_back({3, 2, 1, 1.0 / 3.0, false});
  write_retrieval_csv(path, result);

  CHECK(test::slurp(path) ==
        "query_id,rank,db_id,similarity,correct\n"
        "3,1,0,1,1\n"
        "3,2,1,0.33333333333333331,0\n");
}

TEST_CASE("golden finetune manifest bytes") {
  test::TempDir dir("ft_csv");
  const auto path = dir.path() / "train.csv";

  std::vector<FinetuneEntry> entries;
  entries.push_back({1, 0, "color/000001.png"});
  entries.push_back({2, 0, ""});
  write_finetune_manifest(path, entries);

  CHECK(test::slurp(path) ==
        "frame_id,class_db_id,color_path\n"
        "1,0,color/000001.png\n"
        "2,0,\n");
}
