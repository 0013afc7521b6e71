#include <doctest.h>

#include <random>

#include "midc/droop.hpp"
#include "midc/error.hpp"

using namespace midc;

TEST_SUITE("droop") {
  TEST_CASE("effective generator droop") {
    CHECK(effective_gen_droop(9.5, 0.5) == 10.0);
    CHECK(effective_gen_droop(0.0, 0.7) == 0.7);
    CHECK(effective_gen_droop(5.0, 0.0) == 5.0);
  }

  TEST_CASE("dead zone") {
    auto a = apply_dead_zone(-0.002, 0.004, false);
    CHECK(a.deviation == 0.0);
    CHECK_FALSE(a.latched);
    auto b = apply_dead_zone(-0.006, 0.004, false);
    CHECK(b.deviation == -0.006);
    CHECK(b.latched);
    auto c = apply_dead_zone(-0.001, 0.004, true);
    CHECK(c.deviation == -0.001);
    CHECK(c.latched);
    // reaching the threshold exactly counts as beyond it
    CHECK(apply_dead_zone(0.004, 0.004, false).latched);
  }

  TEST_CASE("signal selection and locking") {
    auto a = select_and_lock(0.11, 0.0, LockState::Unlocked);
    CHECK(a.delta == 0.11);
    CHECK(a.lock == LockState::LockedToRe);
    auto b = select_and_lock(0.0, 0.0, LockState::Unlocked);
    CHECK(b.delta == 0.0);
    CHECK(b.lock == LockState::Unlocked);
    auto c = select_and_lock(0.05, 0.02, LockState::LockedToRe);
    CHECK(c.delta == 0.05);
    CHECK(c.lock == LockState::LockedToRe);
    auto d = select_and_lock(0.0, -0.03, LockState::Unlocked);
    CHECK(d.lock == LockState::LockedToSe);
    CHECK(d.delta == -0.03);
    auto e = select_and_lock(0.2, -0.03, LockState::LockedToSe);
    CHECK(e.delta == -0.03);
  }

  TEST_CASE("power order examples") {
    LccDroopController ctl{.k_re = 11.03, .k_se = 5.0, .nominal = 6.45, .lower = 5.5, .upper = 7.5, .dead_zone = 0.004};
    auto r = lcc_power_order(ctl, -0.01, 0.0);
    CHECK(r.order.value == doctest::Approx(6.5603).epsilon(1e-12));
    CHECK_FALSE(r.order.saturated);
    CHECK(r.next.re_latched);
    CHECK(r.next.lock == LockState::LockedToRe);

    auto quiet = lcc_power_order(ctl, -0.001, 0.002);
    CHECK(quiet.order.value == 6.45);
    CHECK_FALSE(quiet.next.active());

    LccDroopController big = ctl;
    big.k_re = 135.0;  // 6.45 + 1.35 = 7.8 past the 7.5 bound
    auto s = lcc_power_order(big, -0.01, 0.0);
    CHECK(s.order.value == 7.5);
    CHECK(s.order.saturated);
  }

  TEST_CASE("held order keeps the latch fixed") {
    LccDroopController ctl{.k_re = 10.0, .nominal = 6.0, .lower = 5.0, .upper = 7.0, .dead_zone = 0.004};
    CHECK(held_power_order(ctl, -0.01, 0.0).value == 6.0);
    ctl.re_latched = true;
    ctl.lock = LockState::LockedToRe;
    CHECK(held_power_order(ctl, -0.001, 0.0).value == doctest::Approx(6.01));
  }

  TEST_CASE("current order") {
    CHECK(current_order(500.0, 500.0) == 1.0);
    CHECK(current_order(0.0, 660.0) == 0.0);
    bool thrown = false;
    try {
      current_order(660.0, 0.0);
    } catch (const Error& e) {
      thrown = e.kind() == ErrorKind::ZeroDcVoltage;
    }
    CHECK(thrown);
  }

  TEST_CASE("order stays in range on random inputs") {
    std::mt19937_64 rng(20260417);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    long violations = 0;
    long flag_errors = 0;
    for (int i = 0; i < 100000; ++i) {
      LccDroopController c;
      c.lower = 1.0 + 5.0 * u(rng);
      c.upper = c.lower + 3.0 * u(rng);
      c.nominal = c.lower + (c.upper - c.lower) * u(rng);
      c.k_re = 50.0 * u(rng);
      c.k_se = 50.0 * u(rng);
      c.dead_zone = u(rng) < 0.3 ? 0.0 : 0.01 * u(rng);
      c.re_latched = u(rng) < 0.2;
      c.lock = static_cast<LockState>(static_cast<int>(3 * u(rng)) % 3);
      double re = 0.2 * (u(rng) - 0.5);
      double se = 0.2 * (u(rng) - 0.5);
      auto r = lcc_power_order(c, re, se);
      if (!(r.order.value >= c.lower && r.order.value <= c.upper)) ++violations;
      bool interior = r.order.value > c.lower && r.order.value < c.upper;
      if (interior && r.order.saturated) ++flag_errors;
    }
    CHECK(violations == 0);
    CHECK(flag_errors == 0);
  }
}
