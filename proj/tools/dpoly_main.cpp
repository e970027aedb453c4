// dpoly: batch driver for the 2d directed-polymer / collision experiments.
// Subcommands: collisions | moments | field | renewal | operators | appendix | selftest.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "dpoly/chaos.hpp"
#include "dpoly/collision.hpp"
#include "dpoly/config.hpp"
#include "dpoly/operators.hpp"
#include "dpoly/parallel.hpp"
#include "dpoly/polymer.hpp"
#include "dpoly/renewal.hpp"
#include "dpoly/stats.hpp"
#include "dpoly/walk_kernel.hpp"

using namespace dpoly;

namespace {

void write_output(const RunConfig& cfg, const std::string& body) {
  const std::string path = cfg.out.empty() ? cfg.command + ".csv" : cfg.out;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file: " + path);
  f << cfg.csv_header() << body;
  std::printf("wrote %s\n", path.c_str());
}

// per-N scaled totals with common replicas across the horizon grid
struct CollisionRun {
  std::vector<SampleSet> y;                       // per N
  std::vector<std::vector<CollisionTally>> rows;  // [replica][grid]
};

CollisionRun run_collisions(const RunConfig& cfg, CollisionEndpoint ep) {
  CollisionRun run;
  run.rows.assign(cfg.replicas, {});
  parallel_for(cfg.replicas, cfg.workers, [&](std::size_t r) {
    run.rows[r] = simulate_grid(cfg.h, cfg.N_list, cfg.seed, r, ep);
  });
  run.y.assign(cfg.N_list.size(), {});
  for (std::size_t g = 0; g < cfg.N_list.size(); ++g) {
    run.y[g].values.reserve(cfg.replicas);
    for (std::size_t r = 0; r < cfg.replicas; ++r)
      run.y[g].values.push_back(scaled_total(run.rows[r][g]).value);
  }
  return run;
}

int cmd_collisions(RunConfig cfg) {
  const GammaReference ref = gamma_reference(cfg.h);
  const CollisionRun run = run_collisions(cfg, CollisionEndpoint::inclusive_N);

  std::string body = tally_csv_header(cfg.h);
  for (std::size_t r = 0; r < cfg.replicas; ++r)
    for (const auto& t : run.rows[r]) body += tally_csv_row(r, t);
  write_output(cfg, body);

  bool ks_decreasing = true;
  double prev_ks = -1.0;
  for (std::size_t g = 0; g < cfg.N_list.size(); ++g) {
    const long N = cfg.N_list[g];
    auto fr = fit_against(run.y[g], "Gamma(" + format_g17(ref.shape) + ",1)",
                          [&](double x) { return ref.cdf(x); },
                          {ref.shape, ref.shape * (ref.shape + 1.0),
                           ref.shape * (ref.shape + 1.0) * (ref.shape + 2.0),
                           ref.shape * (ref.shape + 1.0) * (ref.shape + 2.0) * (ref.shape + 3.0)});
    const MeanCI mean = mean_ci(run.y[g]);
    const double exact_mean =
        double(pair_count(cfg.h)) * M_PI * overlap_value(N) / std::log(double(N));
    std::printf("N=%-8ld  E[Y]=%.5f +- %.5f (exact %.5f)  KS=%.5f\n", N, mean.mean,
                mean.half_width, exact_mean, fr.ks);
    std::fputs(fr.to_table().c_str(), stdout);
    if (prev_ks >= 0.0 && fr.ks >= prev_ks) ks_decreasing = false;
    prev_ks = fr.ks;
  }
  if (cfg.N_list.size() >= 2)
    std::printf("KS trend over N grid: %s\n", ks_decreasing ? "decreasing" : "NOT decreasing");
  return ks_decreasing ? 0 : 1;
}

int cmd_moments(RunConfig cfg) {
  std::string body = "route,replica_id,beta_hat,N,h,value\n";
  bool trend_ok = true;
  double prev_gap_tm = -1.0, prev_gap_co = -1.0;
  for (const long N : cfg.N_list) {
    MomentOptions mo;
    mo.beta_hat = cfg.beta_hat;
    mo.N = N;
    mo.h = double(cfg.h);
    mo.replicas = cfg.replicas;
    mo.seed = cfg.seed;
    mo.workers = cfg.workers;
    mo.law = disorder_law(cfg.law);
    mo.box_factor = cfg.box_mode == "exact" ? -1.0 : cfg.box_factor;
    if (cfg.box_mode == "exact") mo.box_factor = 2.0 * std::sqrt(double(N));  // covers everything
    mo.smoothed = cfg.get_extra("smoothed", "1") == "1";
    const MomentEstimate tm = moment_estimate(mo);
    for (std::size_t r = 0; r < tm.samples.size(); ++r) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "transfer,%zu,%s,%ld,%d,%s\n", r,
                    format_g17(cfg.beta_hat).c_str(), N, cfg.h, format_g17(tm.samples[r]).c_str());
      body += buf;
    }
    std::printf("N=%-8ld transfer  E[Z^%d]=%.6f +- %.6f  (limit %.6f)\n", N, cfg.h, tm.ci.mean,
                tm.ci.half_width, tm.limit);
    const double gap_tm = std::fabs(tm.ci.mean - tm.limit);
    if (prev_gap_tm >= 0.0 && gap_tm >= prev_gap_tm) trend_ok = false;
    prev_gap_tm = gap_tm;

    if (cfg.law == "gaussian" && cfg.h >= 2) {
      MomentOptions co = mo;
      co.replicas = std::stoull(cfg.get_extra("collision_replicas", std::to_string(cfg.replicas)));
      const MomentEstimate mc = moment_via_collisions(co);
      std::printf("N=%-8ld collision E[Z^%d]=%.6f +- %.6f  agree=%s\n", N, cfg.h, mc.ci.mean,
                  mc.ci.half_width, ci_overlap(tm.ci, mc.ci) ? "yes" : "NO");
      char buf[160];
      std::snprintf(buf, sizeof(buf), "collision_mean,0,%s,%ld,%d,%s\n",
                    format_g17(cfg.beta_hat).c_str(), N, cfg.h, format_g17(mc.ci.mean).c_str());
      body += buf;
      const double gap_co = std::fabs(mc.ci.mean - mc.limit);
      if (prev_gap_co >= 0.0 && gap_co >= prev_gap_co) trend_ok = false;
      prev_gap_co = gap_co;
    }
  }
  write_output(cfg, body);
  std::printf("trend toward limit: %s\n", trend_ok ? "monotone" : "NOT monotone");
  return trend_ok ? 0 : 1;
}

int cmd_field(RunConfig cfg) {
  const double s = std::stod(cfg.get_extra("phi_s", "0.5"));
  const double mass_tol = std::stod(cfg.get_extra("phi_mass_tol", "0.002"));
  const TestFunction phi = phi_gaussian_bump(s, mass_tol);
  std::string body = "N,h,estimate,half_width,target,exact_pair_value\n";
  bool gap_decreasing = true;
  double prev_gap = -1.0;
  for (const long N : cfg.N_list) {
    FieldOptions fo;
    fo.phi = phi;
    fo.beta_hat = cfg.beta_hat;
    fo.N = N;
    fo.h = cfg.h;
    fo.replicas = cfg.replicas;
    fo.seed = cfg.seed;
    fo.workers = cfg.workers;
    fo.box_factor = cfg.box_factor;
    const FieldMoment fm = field_moment(fo);
    const double exact2 = cfg.h == 2 ? field_second_moment_exact(phi, cfg.beta_hat, N) : 0.0;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%ld,%d,%s,%s,%s,%s\n", N, cfg.h,
                  format_g17(fm.ci.mean).c_str(), format_g17(fm.ci.half_width).c_str(),
                  format_g17(fm.target).c_str(), format_g17(exact2).c_str());
    body += buf;
    std::printf("N=%-8ld (log N)^{%d/2} E[Zbar^%d] = %.6f +- %.6f  target %.6f\n", N, cfg.h,
                cfg.h, fm.ci.mean, fm.ci.half_width, fm.target);
    const double gap = std::fabs(fm.ci.mean - fm.target);
    if (prev_gap >= 0.0 && gap >= prev_gap) gap_decreasing = false;
    prev_gap = gap;
  }
  write_output(cfg, body);
  if (cfg.N_list.size() >= 2)
    std::printf("gap to target: %s\n", gap_decreasing ? "decreasing" : "NOT decreasing");
  return gap_decreasing ? 0 : 1;
}

int cmd_renewal(RunConfig cfg) {
  const long N = cfg.N_list.front();
  const std::vector<double> u = U_line(N, cfg.beta_hat);
  std::string body = u_line_csv(N, cfg.beta_hat, u);
  write_output(cfg, body);

  int rc = 0;
  if (N <= 64) {
    const TemperatureSchedule ts = solve_beta(cfg.beta_hat, N);
    const double lhs = second_moment_exact(u, N + 1);
    const double rhs = pair_moment_exact(N + 1, ts.beta_N);
    const double resid = std::fabs(lhs - rhs);
    std::printf("identity sum_n U_N(n) = E[(Z_{N+1})^2]: %.12f vs %.12f  (residual %.3g)\n", lhs,
                rhs, resid);
    if (resid > 1e-10) rc = 1;
  }
  const RenewalSampleEstimate est =
      sample_renewal(N, cfg.beta_hat, cfg.seed, cfg.replicas, -1, cfg.workers);
  const double exact_sum = second_moment_exact(u, N + 1);
  std::printf("sampled checksum %.6f +- %.6f vs exact %.6f\n", est.checksum_mean,
              est.checksum_half_width, exact_sum);
  if (std::fabs(est.checksum_mean - exact_sum) > est.checksum_half_width) rc = 1;
  return rc;
}

int cmd_operators(RunConfig cfg) {
  const std::vector<long> Ns = cfg.N_list;
  std::vector<double> qs;
  for (const auto& tok : parse_long_list(cfg.get_extra("q_grid_x10", "15,20,30,50")))
    qs.push_back(double(tok) / 10.0);
  const int box_cap = std::stoi(cfg.get_extra("box_cap", "8"));
  WeightFunction w;
  w.kind = cfg.get_extra("weight", "exp") == "one" ? WeightFunction::Kind::one
                                                   : WeightFunction::Kind::exp_neg_abs;

  const auto pairs2 = partitions_with_size(3, 2);
  std::string body = norm_csv_header();
  double cfit_min = 1e300, cfit_max = 0.0;
  for (const long N : Ns) {
    OperatorConfig oc;
    oc.N = N;
    oc.h = 3;
    oc.box.B = std::min(box_cap, int(2.0 * std::sqrt(double(N))));
    oc.w = w;
    const auto op = Q_op(oc, pairs2[0], pairs2[1]);
    for (const double q : qs) {
      const double p = q / (q - 1.0);
      const NormBracket nb = op_norm(*op, q, 3, cfg.seed);
      body += norm_csv_row(3, N, q, pairs2[0], pairs2[1], nb, p * q);
      const double ratio = nb.lower / (p * q);
      cfit_min = std::min(cfit_min, ratio);
      cfit_max = std::max(cfit_max, ratio);
      std::printf("N=%-4ld q=%.2f  |Qhat|_q in [%.5f, %.5f]  /(pq) = %.5f\n", N, q, nb.lower,
                  nb.upper, ratio);
    }
    // replica operator: bounded independently of N
    const auto uop = U_op(oc, pairs2[0], cfg.beta_hat);
    const NormBracket un = op_norm(*uop, 2.0, 3, cfg.seed);
    std::printf("N=%-4ld       |Uhat|_2 in [%.5f, %.5f]\n", N, un.lower, un.upper);
    body += norm_csv_row(3, N, 2.0, pairs2[0], pairs2[0], un, 1.0);
    // boundary profile (Prop 3.3 shape)
    const double rt = std::sqrt(double(N));
    BoundaryCheck bc = boundary_norm_check(oc, pairs2[0], 2.0, [&](LatticePoint x) {
      return std::exp(-std::sqrt(x.l2sq()) / rt);
    });
    std::printf("N=%-4ld       boundary ratio %.5f\n", N, bc.ratio);
  }
  write_output(cfg, body);
  // a single fitted constant works across the grid iff max/min ratio <= 1.5
  const bool stable = cfit_max <= 1.5 * cfit_min;
  std::printf("fitted C range: [%.5f, %.5f]  (%s)\n", cfit_min, cfit_max,
              stable ? "stable" : "NOT stable");
  return stable ? 0 : 1;
}

int cmd_appendix(RunConfig cfg) {
  std::string body = "case,lambda,r,p,ap,A,value,bound,ratio\n";
  char buf[256];
  double worst[5] = {0, 0, 0, 0, 0};
  for (const double lam : {1.0, 4.0, 16.0, 64.0})
    for (const double r : {2.0, 3.0}) {
      const AppendixCheck c = appendix_sum(AppendixCase::s1, lam, r, 0, 0, 0);
      std::snprintf(buf, sizeof(buf), "s1,%g,%g,,,,%s,%s,%s\n", lam, r,
                    format_g17(c.value).c_str(), format_g17(c.bound).c_str(),
                    format_g17(c.ratio).c_str());
      body += buf;
      worst[0] = std::max(worst[0], c.ratio);
    }
  for (const double lam : {1.0, 4.0, 16.0, 64.0})
    for (const double r : {2.0, 3.0})
      for (const double p : {1.5, 2.0, 4.0})
        for (const double ap : {0.25, 0.5, 0.75}) {
          const AppendixCheck c = appendix_sum(AppendixCase::s2, lam, r, ap / p, p, 0);
          std::snprintf(buf, sizeof(buf), "s2,%g,%g,%g,%g,,%s,%s,%s\n", lam, r, p, ap,
                        format_g17(c.value).c_str(), format_g17(c.bound).c_str(),
                        format_g17(c.ratio).c_str());
          body += buf;
          worst[1] = std::max(worst[1], c.ratio);
        }
  for (const double A : {4.0, 64.0, 1024.0})
    for (const double lam : {1.0, 4.0, 16.0, 64.0}) {
      const AppendixCheck c = appendix_sum(AppendixCase::s3, lam, 0, 0, 0, A);
      std::snprintf(buf, sizeof(buf), "s3,%g,,,,%g,%s,%s,%s\n", lam, A,
                    format_g17(c.value).c_str(), format_g17(c.bound).c_str(),
                    format_g17(c.ratio).c_str());
      body += buf;
      worst[2] = std::max(worst[2], c.ratio);
    }
  for (const double A : {4.0, 64.0, 1024.0})
    for (const double p : {1.5, 2.0, 4.0}) {
      const AppendixCheck lc = appendix_sum(AppendixCase::logp, 0, 0, 0, p, A);
      worst[3] = std::max(worst[3], lc.ratio);
      const AppendixCheck c = appendix_sum(AppendixCase::s4, 0, 0, 0, p, A);
      std::snprintf(buf, sizeof(buf), "s4,,,%g,,%g,%s,%s,%s\n", p, A,
                    format_g17(c.value).c_str(), format_g17(c.bound).c_str(),
                    format_g17(c.ratio).c_str());
      body += buf;
      worst[4] = std::max(worst[4], c.ratio);
    }
  write_output(cfg, body);
  std::printf("max ratios: s1 %.4f  s2 %.4f  s3 %.4f  logp %.4f  s4 %.4f\n", worst[0], worst[1],
              worst[2], worst[3], worst[4]);
  return 0;
}

int cmd_selftest(RunConfig cfg) {
  (void)cfg;
  int fails = 0;
  auto check = [&](bool ok, const char* what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what);
    if (!ok) ++fails;
  };
  check(std::fabs(kernel(2)(LatticePoint{0, 0}) - 0.25) < 1e-15, "q_2(0) = 1/4");
  check(std::fabs(overlap(2).value - 25.0 / 64.0) < 1e-15, "R_2 = 25/64");
  const TemperatureSchedule ts = solve_beta(0.5, 64);
  const double lhs = second_moment_exact(U_line(64, 0.5), 65);
  const double rhs = pair_moment_exact(65, ts.beta_N);
  check(std::fabs(lhs - rhs) < 1e-10, "renewal identity at N = 64");
  DisorderField env(DisorderLaw{}, 20250809, 0);
  const double z1 = point_to_line_exact(env, ts.beta_N, 6);
  // chaos expansion of the point-to-line function: sum over endpoints
  double z_sum = 0.0;
  for (int a = -6; a <= 6; ++a)
    for (int b = -6; b <= 6; ++b) z_sum += expand(env, ts.beta_N, 0, 6, {}, {a, b}, -1);
  check(std::fabs(z1 - z_sum) < 1e-10, "chaos expansion = transfer matrix at N = 6");
  const CollisionTally t1 = simulate(3, 1000, 7, 13);
  const CollisionTally t2 = simulate(3, 1000, 7, 13);
  check(t1.total == t2.total && t1.pairwise == t2.pairwise, "replica determinism");
  return fails == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) + " - 2d directed polymer and collision experiments"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;
  std::string n_spec;
  std::vector<std::pair<std::string, std::string>> overrides;

  app.set_help_flag("--help", "print help");
  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print help");
    sub->add_option("--config", config_path, "key=value config file");
    sub->add_option("--seed", cfg.seed, "master seed");
    sub->add_option("--workers", cfg.workers, "worker count (0 = auto)");
    sub->add_option("--out", cfg.out, "output CSV path");
    sub->add_option("--N", n_spec, "comma-separated horizon list");
    sub->add_option("--h", cfg.h, "number of walks / moment order");
    sub->add_option("--beta-hat", cfg.beta_hat, "disorder strength in [0,1)");
    sub->add_option("--law", cfg.law, "gaussian | rademacher");
    sub->add_option("--replicas", cfg.replicas, "Monte Carlo replicas");
    sub->add_option("--box-mode", cfg.box_mode, "exact | scaled");
    sub->add_option("--box-factor", cfg.box_factor, "box radius factor (scaled mode)");
    sub->add_option("--set", overrides, "extra key=value pairs")->delimiter('=');
  };

  for (const char* name : {"collisions", "moments", "field", "renewal", "operators", "appendix",
                           "selftest"})
    add_common(app.add_subcommand(name));

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig base;
    if (!config_path.empty()) base.load_file(config_path);
    // CLI overrides beat the file: re-apply parsed values over the file copy
    base.command = command;
    if (app.get_subcommands().front()->count("--seed")) base.seed = cfg.seed;
    if (app.get_subcommands().front()->count("--workers")) base.workers = cfg.workers;
    if (app.get_subcommands().front()->count("--out")) base.out = cfg.out;
    if (app.get_subcommands().front()->count("--h")) base.h = cfg.h;
    if (app.get_subcommands().front()->count("--beta-hat")) base.beta_hat = cfg.beta_hat;
    if (app.get_subcommands().front()->count("--law")) base.law = cfg.law;
    if (app.get_subcommands().front()->count("--replicas")) base.replicas = cfg.replicas;
    if (app.get_subcommands().front()->count("--box-mode")) base.box_mode = cfg.box_mode;
    if (app.get_subcommands().front()->count("--box-factor")) base.box_factor = cfg.box_factor;
    if (!n_spec.empty()) base.N_list = parse_long_list(n_spec);
    for (const auto& [k, v] : overrides) base.extra[k] = v;
    base.validate();

    if (command == "collisions") return cmd_collisions(base);
    if (command == "moments") return cmd_moments(base);
    if (command == "field") return cmd_field(base);
    if (command == "renewal") return cmd_renewal(base);
    if (command == "operators") return cmd_operators(base);
    if (command == "appendix") return cmd_appendix(base);
    if (command == "selftest") return cmd_selftest(base);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
