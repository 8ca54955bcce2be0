#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "velatt/error.hpp"
#include "velatt/velocity.hpp"

using namespace velatt;

namespace {

Trajectory one(std::vector<ActionVector> actions) {
  Trajectory t;
  t.id = "t";
  t.actions = std::move(actions);
  return t;
}

}  // namespace

TEST_CASE("dimension masks") {
  CHECK(DimMask::parse("0-5").indices() == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
  CHECK(DimMask::parse("0-2,5").to_string() == "0-2,5");
  CHECK(DimMask::parse("3,1,1").indices() == std::vector<std::size_t>{1, 3});
  CHECK(DimMask::default_for(7) == DimMask::range(0, 6));
  CHECK(DimMask::default_for(1).indices() == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(DimMask::parse(""), ValidationError);
  CHECK_THROWS_AS(DimMask::parse("a"), ValidationError);
  CHECK_THROWS_AS(DimMask::parse("3-1"), ValidationError);
  CHECK_THROWS_AS(DimMask::default_for(0), ValidationError);
  CHECK_THROWS_AS(DimMask::parse("7").check_fits(7), ValidationError);
}

TEST_CASE("3-4-5 step with the gripper excluded") {
  const auto f = compute_velocity(one({{3, 4, 0, 0, 0, 0, 1}}), DimMask::range(0, 6));
  CHECK(f.values == std::vector<double>{5.0});
}

TEST_CASE("zero step has zero speed") {
  const auto f = compute_velocity(one({{0, 0, 0}}), DimMask::default_for(3));
  CHECK(f.values[0] == 0.0);
}

TEST_CASE("hand-evaluated speeds") {
  const auto f = compute_velocity(one({{1, 0}, {0, 2}, {2, 2}}), DimMask::parse("0,1"));
  REQUIRE(f.values.size() == 3);
  CHECK(f.values[0] == 1.0);
  CHECK(f.values[1] == 2.0);
  CHECK(f.values[2] == doctest::Approx(2.828427125).epsilon(1e-9));
}

TEST_CASE("batch velocity keeps dataset order") {
  Trajectory a = one({{1, 0}});
  a.id = "first";
  Trajectory b = one({{0, 1}, {1, 1}});
  b.id = "second";
  const Dataset ds = Dataset::from_trajectories({a, b});
  const auto fields = batch_velocity(ds, DimMask::default_for(2));
  REQUIRE(fields.size() == 2);
  CHECK(fields[0].source_id == "first");
  CHECK(fields[1].source_id == "second");
  CHECK(batch_velocity(Dataset{}, DimMask::default_for(2)).empty());
  CHECK_THROWS_AS(batch_velocity(ds, DimMask::parse("2")), ValidationError);
}

TEST_CASE("summary statistics") {
  const VelocityField simple{{1, 2, 3}, "s", DimMask({0})};
  const VelocityStats s = velocity_stats(simple);
  CHECK(s.min == 1.0);
  CHECK(s.max == 3.0);
  CHECK(s.mean == 2.0);
  CHECK(s.q50 == 2.0);

  const VelocityField constant{std::vector<double>(9, 0.1), "c", DimMask({0})};
  const VelocityStats c = velocity_stats(constant);
  for (double x : {c.min, c.max, c.mean, c.q10, c.q50, c.q90}) CHECK(x == 0.1);

  std::vector<double> ramp(10);
  for (int i = 0; i < 10; ++i) ramp[i] = i;
  // h = 9 * 0.1 = 0.9 lies between the ranks holding 0 and 1.
  CHECK(quantile_sorted(ramp, 0.1) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(quantile_sorted(ramp, 0.0) == 0.0);
  CHECK(quantile_sorted(ramp, 1.0) == 9.0);
  CHECK_THROWS_AS(quantile_sorted(std::vector<double>{}, 0.5), ValidationError);
}

TEST_CASE("velocity csv") {
  const VelocityField f{{0.5, 1.25}, "x", DimMask({0})};
  std::ostringstream out;
  write_velocity_csv(std::span(&f, 1), out);
  CHECK(out.str() == "traj_id,t,v\nx,0,0.5\nx,1,1.25\n");
}
