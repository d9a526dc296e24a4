#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dogm/autolabel.hpp"
#include "test_util.hpp"

using namespace dogm;

namespace {

GridGeometry tiny_grid(int w, int h) {
  GridGeometry g;
  g.width_cells = w;
  g.height_cells = h;
  g.cell_size = 0.15;
  g.origin = {0.0, 0.0};
  return g;
}

// Builds a 7-channel frame whose occupancy probability plane equals `po`.
GridFrame frame_from_po(const GridGeometry& g, const Plane<float>& po, double t) {
  GridFrame f = GridFrame::zeros(g, kDogmaChannels);
  f.timestamp = t;
  for (int n = 0; n < g.height_cells; ++n) {
    for (int e = 0; e < g.width_cells; ++e) {
      const float p = po(n, e);
      if (p >= 0.5f) {
        f.channels[kMassOcc](n, e) = 2.0f * p - 1.0f;
      } else {
        f.channels[kMassFree](n, e) = 1.0f - 2.0f * p;
      }
    }
  }
  return f;
}

std::vector<GridFrame> frames_from_series(const GridGeometry& g,
                                          const std::vector<Plane<float>>& po_planes) {
  std::vector<GridFrame> frames;
  for (size_t t = 0; t < po_planes.size(); ++t)
    frames.push_back(frame_from_po(g, po_planes[t], 0.1 * t));
  return frames;
}

// Single-cell helper: P_O series for cell (0, 0) of a 1x1 grid padded to 5x5.
std::vector<GridFrame> single_cell_frames(const std::vector<float>& series, int e = 2, int n = 2) {
  const GridGeometry g = tiny_grid(5, 5);
  std::vector<Plane<float>> planes;
  for (const float p : series) {
    Plane<float> plane = Plane<float>::Constant(5, 5, 0.2f);
    plane(n, e) = p;
    planes.push_back(plane);
  }
  return frames_from_series(g, planes);
}

}  // namespace

TEST_CASE("ego_align: standing ego is the identity") {
  const GridGeometry g = tiny_grid(9, 9);
  std::vector<GridFrame> frames;
  for (int t = 0; t < 3; ++t) {
    GridFrame f = GridFrame::zeros(g, 1);
    f.timestamp = 0.1 * t;
    f.ego_pose = {1.0, 2.0, 0.3};
    f.channels[0](4, 4) = 0.9f;
    frames.push_back(f);
  }
  const auto aligned = ego_align(frames);
  REQUIRE(aligned.size() == 3);
  for (int t = 0; t < 3; ++t)
    CHECK((aligned[t].channels[0] == frames[t].channels[0]).all());
}

TEST_CASE("ego_align: integral shifts keep static world cells at fixed indices") {
  const GridGeometry g = tiny_grid(9, 9);
  // static world point stored at (5,4) in frame 0; ego then moves +1 cell
  // east, so the same point lands one index lower in the raw second frame
  GridFrame f0 = GridFrame::zeros(g, 1);
  f0.ego_pose = {0.0, 0.0, 0.0};
  f0.channels[0](4, 5) = 1.0f;
  GridFrame f1 = GridFrame::zeros(g, 1);
  f1.timestamp = 0.1;
  f1.ego_pose = {g.cell_size, 0.0, 0.0};
  f1.channels[0](4, 4) = 1.0f;

  const auto aligned = ego_align({f0, f1});
  CHECK(aligned[1].channels[0](4, 5) == 1.0f);
  CHECK(aligned[1].channels[0](4, 4) == 0.0f);
}

TEST_CASE("ego_align: fractional shifts resample bilinearly and conserve mass") {
  const GridGeometry g = tiny_grid(15, 15);
  GridFrame f0 = GridFrame::zeros(g, 1);
  f0.ego_pose = {0.0, 0.0, 0.0};
  GridFrame f1 = GridFrame::zeros(g, 1);
  f1.timestamp = 0.1;
  f1.ego_pose = {0.5 * g.cell_size, 0.0, 0.0};
  // interior blob away from the borders
  for (int n = 6; n <= 8; ++n)
    for (int e = 6; e <= 8; ++e) f1.channels[0](n, e) = 0.8f;
  const double mass_before = f1.channels[0].cast<double>().sum();

  const auto aligned = ego_align({f0, f1});
  const double mass_after = aligned[1].channels[0].cast<double>().sum();
  CHECK(std::abs(mass_after - mass_before) / mass_before < 0.01);
  // halfway shift splits the edge columns
  CHECK(aligned[1].channels[0](7, 7) == doctest::Approx(0.8f));
  CHECK(aligned[1].channels[0](7, 6) == doctest::Approx(0.4f));
}

TEST_CASE("ego_align rejects rotational motion and non-finite poses") {
  const GridGeometry g = tiny_grid(5, 5);
  GridFrame f0 = GridFrame::zeros(g, 1);
  GridFrame f1 = GridFrame::zeros(g, 1);
  f1.timestamp = 0.1;
  f1.ego_pose = {0.0, 0.0, 0.2};
  CHECK_THROWS_AS(ego_align({f0, f1}), std::invalid_argument);
  f1.ego_pose = {std::nan(""), 0.0, 0.0};
  CHECK_THROWS_AS(ego_align({f0, f1}), std::invalid_argument);
}

TEST_CASE("classify: persistent occupancy is static") {
  const auto frames = single_cell_frames(std::vector<float>(20, 0.9f));
  const auto cls = classify_cells(frames);
  CHECK(cls.aggregate(2, 2) == doctest::Approx(0.0f));
  for (int t = 0; t < 20; ++t) {
    CHECK(cls.applicable(t, 2, 2));
    CHECK_FALSE(cls.dynamic_at(t, 2, 2, 0.5));
  }
  // free background cells carry no score at all
  CHECK_FALSE(cls.applicable(3, 0, 0));
  CHECK(cls.aggregate(0, 0) == doctest::Approx(-1.0f));
}

TEST_CASE("classify: canonical rise and fall marks the occupied interval dynamic") {
  std::vector<float> series(25, 0.5f);
  for (int t = 5; t <= 15; ++t) series[t] = 0.9f;
  for (int t = 16; t < 25; ++t) series[t] = 0.1f;
  const auto frames = single_cell_frames(series);
  const auto cls = classify_cells(frames);
  CHECK(cls.aggregate(2, 2) == doctest::Approx(1.0f));
  for (int t = 5; t <= 15; ++t) CHECK(cls.dynamic_at(t, 2, 2, 0.5));
  for (int t = 0; t < 5; ++t) CHECK_FALSE(cls.applicable(t, 2, 2));
  CHECK_FALSE(cls.dynamic_at(20, 2, 2, 0.5));
}

TEST_CASE("classify: a wall revealed from occlusion stays static despite filter velocities") {
  std::vector<float> series(30, 0.5f);
  for (int t = 10; t < 30; ++t) series[t] = 0.9f;
  auto frames = single_cell_frames(series);
  // false velocity estimates on the revealed cells, as the filter produces
  for (auto& f : frames) f.channels[kVelEast].setConstant(3.0f);
  const auto cls = classify_cells(frames);
  CHECK(cls.aggregate(2, 2) == doctest::Approx(0.0f));
  for (int t = 10; t < 30; ++t) CHECK_FALSE(cls.dynamic_at(t, 2, 2, 0.5));
}

TEST_CASE("classify: scores never depend on the velocity channels") {
  Rng rng(63);
  const GridGeometry g = tiny_grid(7, 7);
  std::vector<GridFrame> frames;
  for (int t = 0; t < 12; ++t) {
    Plane<float> po(7, 7);
    for (int i = 0; i < po.size(); ++i)
      po.data()[i] = static_cast<float>(rng.uniform(0.05, 0.95));
    GridFrame f = frame_from_po(g, po, 0.1 * t);
    f.channels[kVelEast].setConstant(static_cast<float>(rng.uniform(-9, 9)));
    f.channels[kVelNorth].setConstant(static_cast<float>(rng.uniform(-9, 9)));
    f.channels[kVarVelEast].setConstant(2.0f);
    frames.push_back(f);
  }
  const auto with_velocity = classify_cells(frames);
  for (auto& f : frames) {
    f.channels[kVelEast].setZero();
    f.channels[kVelNorth].setZero();
    f.channels[kVarVelEast].setZero();
  }
  const auto without_velocity = classify_cells(frames);
  CHECK((with_velocity.aggregate == without_velocity.aggregate).all());
  for (size_t t = 0; t < frames.size(); ++t)
    CHECK((with_velocity.score[t] == without_velocity.score[t]).all());
}

TEST_CASE("classify: appending all-unknown frames changes nothing") {
  std::vector<float> series(20, 0.5f);
  for (int t = 4; t <= 9; ++t) series[t] = 0.92f;
  for (int t = 10; t < 20; ++t) series[t] = 0.15f;
  auto frames = single_cell_frames(series);
  const auto base = classify_cells(frames);

  auto extended_series = series;
  extended_series.insert(extended_series.end(), 10, 0.5f);
  auto extended = single_cell_frames(extended_series);
  const auto cls = classify_cells(extended);

  CHECK((cls.aggregate == base.aggregate).all());
  for (size_t t = 0; t < frames.size(); ++t) CHECK((cls.score[t] == base.score[t]).all());
}

TEST_CASE("classify: unterminated rise stays dynamic only with a coherent moving front") {
  const GridGeometry g = tiny_grid(12, 5);
  const int T = 30;
  // object two cells long marching east one cell per frame, still moving at
  // the cut; the revealed-wall pattern rises once and persists
  std::vector<Plane<float>> planes(T, Plane<float>::Constant(5, 12, 0.2f));
  for (int t = 0; t < T; ++t) {
    for (int e = 0; e < 12; ++e) {
      const int arrival = 14 + e;  // cell e occupied during [arrival, arrival+2)
      if (t >= arrival && t < arrival + 2 && e < 12) planes[t](2, e) = 0.9f;
    }
  }
  const auto frames = frames_from_series(g, planes);
  const auto cls = classify_cells(frames);
  // trailing cells completed their episodes: dynamic
  CHECK(cls.aggregate(2, 5) == doctest::Approx(1.0f));
  CHECK(cls.aggregate(2, 10) == doctest::Approx(1.0f));
  // the cut-off leading cell (rise at t=27..29, never falls) is corroborated
  // by the complete episodes right behind it
  CHECK(cls.aggregate(2, 11) > 0.5f);

  // revealed-wall pattern: same rise timing but the whole region persists
  std::vector<Plane<float>> wall(T, Plane<float>::Constant(5, 12, 0.2f));
  for (int t = 0; t < T; ++t)
    for (int e = 0; e < 12; ++e)
      if (t >= 14 + e) wall[t](2, e) = 0.9f;
  const auto wall_cls = classify_cells(frames_from_series(g, wall));
  for (int e = 0; e < 12; ++e) CHECK(wall_cls.aggregate(2, e) <= 0.0f);
}

TEST_CASE("classify rejects sequences shorter than 3 frames") {
  auto frames = single_cell_frames({0.5f, 0.9f});
  CHECK_THROWS_AS(classify_cells(frames), std::invalid_argument);
}

TEST_CASE("fit_rectangles: blob dimensions, area gate, component separation") {
  const GridGeometry g = tiny_grid(30, 30);
  CellClassification cls;
  cls.geometry = g;
  cls.score.assign(1, Plane<float>::Constant(30, 30, -1.0f));
  cls.aggregate = Plane<float>::Constant(30, 30, -1.0f);

  SUBCASE("axis-aligned 10x4 blob yields a 1.5 x 0.6 rectangle") {
    for (int n = 10; n < 14; ++n)
      for (int e = 5; e < 15; ++e) cls.score[0](n, e) = 1.0f;
    const auto boxes = fit_rectangles(cls);
    REQUIRE(boxes[0].size() == 1);
    const ObjectBox& b = boxes[0][0];
    CHECK(b.width == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(b.length == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(b.orientation == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(b.center_east == doctest::Approx(g.origin.x() + 10 * 0.15).epsilon(1e-9));
  }

  SUBCASE("blobs below min_cells are dropped") {
    cls.score[0](3, 3) = 1.0f;
    cls.score[0](3, 4) = 1.0f;
    const auto boxes = fit_rectangles(cls);
    CHECK(boxes[0].empty());
  }

  SUBCASE("two disjoint blobs give two rectangles") {
    for (int n = 2; n < 5; ++n)
      for (int e = 2; e < 5; ++e) cls.score[0](n, e) = 1.0f;
    for (int n = 20; n < 23; ++n)
      for (int e = 20; e < 24; ++e) cls.score[0](n, e) = 1.0f;
    const auto boxes = fit_rectangles(cls);
    CHECK(boxes[0].size() == 2);
  }
}

TEST_CASE("percentile: nearest-rank semantics") {
  CHECK(percentile_nearest_rank({4.0, 4.1, 2.0, 4.0}, 0.9) == doctest::Approx(4.1));
  CHECK(percentile_nearest_rank({4.0, 4.1, 2.0, 4.0}, 0.5) == doctest::Approx(4.0));
  CHECK(percentile_nearest_rank({7.0}, 0.9) == doctest::Approx(7.0));
  CHECK_THROWS_AS(percentile_nearest_rank({}, 0.9), std::invalid_argument);
}

TEST_CASE("refine_tracks: occluded frames inherit the percentile extent") {
  std::vector<std::vector<ObjectBox>> per_frame;
  const std::vector<double> lengths{4.0, 4.1, 2.0, 4.0};
  for (size_t t = 0; t < lengths.size(); ++t) {
    per_frame.push_back(
        {ObjectBox::make({0.1 * t, 0.0}, 1.8, lengths[t], 0.0)});
  }
  const auto tracks = refine_tracks(per_frame, 0.1);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].valid);
  CHECK(tracks[0].refined_length == doctest::Approx(4.1));
  CHECK(tracks[0].refined_width == doctest::Approx(1.8));
  for (const ObjectBox& b : tracks[0].boxes) CHECK(b.length == doctest::Approx(4.1));
}

TEST_CASE("refine_tracks: flicker and implausible jumps are invalidated") {
  SUBCASE("single-frame flicker is pruned by the length gate") {
    std::vector<std::vector<ObjectBox>> per_frame(5);
    per_frame[2].push_back(ObjectBox::make({1.0, 1.0}, 0.6, 0.6, 0.0));
    const auto tracks = refine_tracks(per_frame, 0.1);
    REQUIRE(tracks.size() == 1);
    CHECK_FALSE(tracks[0].valid);
  }

  SUBCASE("an 80 m/s centroid jump fails the speed gate") {
    AutolabelConfig cfg;
    cfg.assoc_gate = 20.0;  // let the association build the absurd track
    std::vector<std::vector<ObjectBox>> per_frame;
    for (int t = 0; t < 4; ++t)
      per_frame.push_back({ObjectBox::make({8.0 * t, 0.0}, 0.6, 0.6, 0.0)});
    const auto tracks = refine_tracks(per_frame, 0.1, cfg);
    REQUIRE(tracks.size() == 1);
    CHECK_FALSE(tracks[0].valid);
  }

  SUBCASE("hard acceleration fails the accel gate") {
    AutolabelConfig cfg;
    cfg.assoc_gate = 20.0;
    std::vector<std::vector<ObjectBox>> per_frame;
    const std::vector<double> east{0.0, 0.1, 1.4, 2.7};  // 1 -> 13 m/s in one step
    for (const double x : east) per_frame.push_back({ObjectBox::make({x, 0.0}, 0.6, 0.6, 0.0)});
    const auto tracks = refine_tracks(per_frame, 0.1, cfg);
    REQUIRE(tracks.size() == 1);
    CHECK_FALSE(tracks[0].valid);
  }
}

TEST_CASE("refine_tracks: orientation follows the motion direction when moving") {
  std::vector<std::vector<ObjectBox>> per_frame;
  for (int t = 0; t < 6; ++t) {
    // fitted orientation is noisy; the track moves north-east at ~2 m/s
    per_frame.push_back(
        {ObjectBox::make({0.14 * t, 0.14 * t}, 0.6, 1.0, 1.2)});
  }
  const auto tracks = refine_tracks(per_frame, 0.1);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].valid);
  for (const ObjectBox& b : tracks[0].boxes)
    CHECK(b.orientation == doctest::Approx(kPi / 4).epsilon(1e-6));
}

TEST_CASE("refine_tracks: never more boxes than inputs, association splits by gate") {
  Rng rng(77);
  for (int round = 0; round < 30; ++round) {
    std::vector<std::vector<ObjectBox>> per_frame(8);
    for (auto& frame : per_frame) {
      const int count = static_cast<int>(rng.next_u64() % 4);
      for (int i = 0; i < count; ++i)
        frame.push_back(ObjectBox::make({rng.uniform(-5, 5), rng.uniform(-5, 5)},
                                        rng.uniform(0.3, 1.0), rng.uniform(0.3, 2.0),
                                        rng.uniform(-1.5, 1.5)));
    }
    const auto tracks = refine_tracks(per_frame, 0.1);
    std::vector<int> boxes_out(per_frame.size(), 0);
    for (const Track& tr : tracks) {
      CHECK(tr.first_frame + tr.boxes.size() <= per_frame.size());
      for (size_t i = 0; i < tr.boxes.size(); ++i) ++boxes_out[tr.first_frame + i];
      CHECK(tr.refined_width <= tr.refined_length + 1e-12);
    }
    for (size_t t = 0; t < per_frame.size(); ++t) CHECK(boxes_out[t] == per_frame[t].size());
  }
}

TEST_CASE("make_labels: static map equals P_O with dynamic regions removed") {
  const GridGeometry g = tiny_grid(10, 10);
  const int T = 6;
  std::vector<Plane<float>> planes(T, Plane<float>::Constant(10, 10, 0.8f));
  auto frames = frames_from_series(g, planes);

  SUBCASE("all-static frame reproduces the P_O image") {
    const auto cls = classify_cells(frames);
    const auto labels = make_labels({}, cls, frames);
    for (int t = 0; t < T; ++t) {
      const Plane<float> po = occupancy_probability(frames[t]);
      CHECK((labels.static_map[t] == po).all());
      CHECK(labels.boxes[t].empty());
    }
  }

  SUBCASE("cells under a valid track are removed") {
    const auto cls = classify_cells(frames);
    Track tr;
    tr.id = 0;
    tr.first_frame = 1;
    tr.valid = true;
    tr.boxes = {ObjectBox::make({0.6, 0.6}, 0.45, 0.45, 0.0),
                ObjectBox::make({0.6, 0.6}, 0.45, 0.45, 0.0),
                ObjectBox::make({0.6, 0.6}, 0.45, 0.45, 0.0)};
    tr.refined_width = tr.refined_length = 0.45;
    const auto labels = make_labels({tr}, cls, frames);
    CHECK(labels.static_map[0](4, 4) == doctest::Approx(0.8f));  // before the track
    CHECK(labels.static_map[1](4, 4) == 0.0f);
    CHECK(labels.static_map[1](3, 4) == 0.0f);
    CHECK(labels.static_map[1](8, 8) == doctest::Approx(0.8f));  // outside the box
    CHECK(labels.boxes[1].size() == 1);
  }

  SUBCASE("invalid tracks contribute nothing") {
    const auto cls = classify_cells(frames);
    Track tr;
    tr.valid = false;
    tr.first_frame = 0;
    tr.boxes = {ObjectBox::make({0.6, 0.6}, 0.45, 0.45, 0.0)};
    const auto labels = make_labels({tr}, cls, frames);
    CHECK(labels.boxes[0].empty());
    CHECK(labels.static_map[0](4, 4) == doctest::Approx(0.8f));
  }
}
