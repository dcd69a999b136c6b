#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgt/errors.hpp"
#include "sgt/weights.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <sstream>

using namespace sgt;

namespace {

double d(const Real& x) { return x.convert_to<double>(); }

double head_plus_tail(const OffspringLaw& law) {
  Real s = law.tail_mass();
  for (std::uint64_t k = 0; k < law.truncation(); ++k) s += law.pmf(k);
  return d(s);
}

}  // namespace

TEST_CASE("uniform weights give the geometric law exactly") {
  auto law = classify(WeightSequence::uniform());
  CHECK(law.type() == WeightType::I);
  REQUIRE(law.tau_exact());
  CHECK(*law.tau_exact() == Rational(1, 2));
  for (unsigned k = 0; k < 20; ++k) CHECK(*law.exact_pmf(k) == Rational(1, 1u << (k + 1)));
  CHECK(*law.mu_exact() == 1);
  REQUIRE(law.sigma2_exact());
  CHECK(*law.sigma2_exact() == 2);
  CHECK(law.psi_residual() == 0.0);
}

TEST_CASE("powerlaw alpha=3 is type II with zeta constants") {
  auto law = classify(WeightSequence::powerlaw(Rational(3)));
  CHECK(law.type() == WeightType::II);
  double z2 = boost::math::zeta(2.0), z3 = boost::math::zeta(3.0);
  CHECK(d(law.nu()) == doctest::Approx(z2 / (1 + z3)).epsilon(1e-13));
  CHECK(d(law.mu()) == doctest::Approx(z2 / (1 + z3)).epsilon(1e-13));
  CHECK(d(law.mu()) == doctest::Approx(0.7470).epsilon(1e-4));
  CHECK(d(law.pmf(0)) == doctest::Approx(1 / (1 + z3)).epsilon(1e-13));
  CHECK(d(law.tau()) == 1.0);
  CHECK(law.sigma2_infinite());
}

TEST_CASE("type II mean agrees with direct summation") {
  auto law = classify(WeightSequence::powerlaw(Rational(3)));
  const long K = 1000000;
  long double phi = static_cast<long double>(d(law.phi_tau()));
  long double s = 0;
  for (long k = K; k >= 1; --k) s += 1.0L / (static_cast<long double>(k) * k) / phi;
  s += 1.0L / (static_cast<long double>(K) * phi);  // integral tail
  CHECK(std::fabs(static_cast<double>(s) - d(law.mu())) < 1e-8);
}

TEST_CASE("factorial weights are type III") {
  auto w = WeightSequence::factorial(Rational(1));
  CHECK(w.radius().kind == Radius::Kind::zero);
  CHECK(*w.exact_weight(5) == 120);
  auto law = classify(w);
  CHECK(law.type() == WeightType::III);
  CHECK(*law.exact_pmf(0) == 1);
  CHECK(*law.exact_pmf(3) == 0);
  CHECK(*law.mu_exact() == 0);
  CHECK(d(law.tau()) == 0.0);
}

TEST_CASE("cayley weights tilt to Poisson(1)") {
  auto law = classify(WeightSequence::cayley());
  CHECK(law.type() == WeightType::I);
  CHECK(d(law.tau()) == doctest::Approx(1.0).epsilon(1e-11));
  for (unsigned k = 0; k < 10; ++k)
    CHECK(d(law.pmf(k)) == doctest::Approx(std::exp(-1.0) / std::tgamma(k + 1.0)).epsilon(1e-10));
  CHECK(d(law.sigma2()) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("finite supports snap to rational tau") {
  auto motz = classify(builtin({"motzkin"}));
  REQUIRE(motz.tau_exact());
  CHECK(*motz.tau_exact() == 1);
  CHECK(*motz.exact_pmf(1) == Rational(1, 3));
  CHECK(*motz.sigma2_exact() == Rational(2, 3));
  auto bin = classify(builtin({"binary"}));
  CHECK(*bin.tau_exact() == 1);
  CHECK(*bin.exact_pmf(2) == Rational(1, 2));
  CHECK(*bin.sigma2_exact() == 1);
}

TEST_CASE("size-biased law") {
  auto geo = size_biased(classify(WeightSequence::uniform()));
  CHECK(d(geo.infinity_mass()) == 0.0);
  CHECK(d(geo.finite_mass(1)) == 0.25);
  CHECK(d(geo.finite_mass(0)) == 0.0);
  auto t3 = size_biased(classify(WeightSequence::factorial(Rational(1))));
  CHECK(d(t3.infinity_mass()) == 1.0);
  auto t2 = size_biased(classify(WeightSequence::powerlaw(Rational(3))));
  CHECK(d(t2.infinity_mass()) == doctest::Approx(0.2530).epsilon(2e-4));
}

TEST_CASE("span") {
  CHECK(span(WeightSequence::finite({{0, 1}, {2, 1}}, "b")) == 2);
  CHECK(span(WeightSequence::uniform()) == 1);
  CHECK(span(WeightSequence::finite({{0, 1}, {3, 1}, {6, 1}}, "t")) == 3);
}

TEST_CASE("builtin families") {
  auto u = builtin({"uniform"});
  CHECK(u.radius().kind == Radius::Kind::finite);
  CHECK(u.radius().value == 1);
  CHECK(*u.exact_weight(17) == 1);
  auto f = builtin({"factorial", std::string("1")});
  CHECK(f.radius().kind == Radius::Kind::zero);
  auto p = builtin({"powerlaw", std::string("3")});
  CHECK(*p.exact_weight(0) == 1);
  CHECK(*p.exact_weight(2) == Rational(1, 8));
  CHECK(p.radius().value == 1);
  CHECK_THROWS_AS(builtin({"nope"}), Error);
  CHECK_THROWS_AS(builtin({"powerlaw", std::string("-1")}), Error);
}

TEST_CASE("classification invariants over builtin families") {
  for (const char* name : {"uniform", "binary", "motzkin", "cayley", "powerlaw", "factorial"}) {
    CAPTURE(name);
    auto law = classify(builtin({name}));
    if (law.type() == WeightType::I) CHECK(law.psi_residual() <= 1e-10);
    CHECK(std::fabs(head_plus_tail(law) - 1.0) <= 1e-10);
    if (law.type() == WeightType::I) CHECK(d(law.mu()) == 1.0);
    if (law.type() == WeightType::II) CHECK(law.mu() == law.nu());
    auto again = classify(builtin({name}));
    CHECK(to_string(law.tau()) == to_string(again.tau()));
    CHECK(to_string(law.pmf(3)) == to_string(again.pmf(3)));
  }
  auto heavy = classify(builtin({"powerlaw", std::string("5/2")}));
  CHECK(heavy.type() == WeightType::I);
  CHECK(heavy.psi_residual() <= 1e-10);
  CHECK(std::fabs(head_plus_tail(heavy) - 1.0) <= 1e-10);
}

TEST_CASE("weight files") {
  std::istringstream good("radius=inf\n0\t1\n1\t0.5\n2\t1/4\n");
  auto w = WeightSequence::parse(good, "t");
  CHECK(*w.exact_weight(1) == Rational(1, 2));
  CHECK(*w.exact_weight(2) == Rational(1, 4));
  CHECK(*w.exact_weight(7) == 0);
  auto law = classify(w);
  CHECK(law.type() == WeightType::I);

  std::istringstream zero("radius=0\n0\t1\n1\t1\n2\t2\n3\t6\n");
  auto z = WeightSequence::parse(zero, "z");
  CHECK(classify(z).type() == WeightType::III);
  CHECK_THROWS_AS(z.exact_weight(9), Error);

  std::istringstream nohead("0\t1\n2\t1\n");
  CHECK_THROWS_AS(WeightSequence::parse(nohead, "x"), Error);
  std::istringstream neg("radius=inf\n0\t1\n2\t-1\n");
  CHECK_THROWS_AS(WeightSequence::parse(neg, "x"), Error);
  std::istringstream nozero("radius=inf\n1\t1\n2\t1\n");
  CHECK_THROWS_AS(WeightSequence::parse(nozero, "x"), Error);
  std::istringstream finite_rho("radius=1/2\n0\t1\n2\t1\n");
  auto fr = WeightSequence::parse(finite_rho, "x");
  try {
    classify(fr);
    FAIL("expected precision failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precision);
  }
}

TEST_CASE("precision override") {
  PrecisionScope scope(256);
  CHECK(precision_bits() >= 256);
  auto law = classify(WeightSequence::powerlaw(Rational(3)));
  CHECK(std::fabs(head_plus_tail(law) - 1.0) <= 1e-10);
}
