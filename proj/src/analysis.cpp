#include "autocode/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "autocode/error.hpp"
#include "autocode/jsonl.hpp"
#include "autocode/rollout.hpp"

namespace autocode::analysis {

std::string_view to_string(Arm a) {
  switch (a) {
    case Arm::autonomous: return "auto";
    case Arm::cot: return "cot";
    case Arm::code: return "code";
  }
  return "auto";
}

Arm parse_arm(std::string_view s) {
  if (s == "auto") return Arm::autonomous;
  if (s == "cot") return Arm::cot;
  if (s == "code") return Arm::code;
  throw InvalidArgument("unknown arm '" + std::string(s) + "'");
}

std::vector<Arm> parse_arms(std::string_view csv) {
  std::vector<Arm> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = csv.find(',', start);
    const auto piece = csv.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const Arm a = parse_arm(piece);
    if (std::find(out.begin(), out.end(), a) != out.end()) throw InvalidArgument("arm listed twice");
    out.push_back(a);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void validate(const EvalResult& r) {
  if (r.n < 1) throw InvalidArgument("evaluation needs n >= 1");
  for (int a = 0; a < 3; ++a) {
    const auto& rows = r.outcomes[a];
    if (rows.empty()) continue;
    if (rows.size() != r.query_ids.size()) throw ShapeMismatch("arm coverage does not match the query set");
    for (const auto& row : rows) {
      if (row.size() != static_cast<std::size_t>(r.n)) throw MissingInput("missing samples");
      for (int o : row)
        if (o != 0 && o != 1) throw InvalidArgument("outcome outside {0,1}");
    }
  }
  if (r.has(Arm::autonomous)) {
    if (r.auto_choice.size() != r.query_ids.size()) throw ShapeMismatch("autonomous choices missing");
    for (const auto& row : r.auto_choice)
      if (row.size() != static_cast<std::size_t>(r.n)) throw MissingInput("missing autonomous choices");
  }
}

EvalResult evaluate(std::span<const env::SynthQuerySpec> suite, const policy::PolicyParams& p, int n,
                    std::uint64_t seed, std::span<const Arm> arms, const kernels::ExecPolicy& ex) {
  if (n < 1) throw InvalidArgument("evaluation needs n >= 1");
  if (p.layout->size() != suite.size()) throw ShapeMismatch("policy does not match the suite");
  const std::size_t nq = suite.size();
  EvalResult r;
  r.n = n;
  r.seed = seed;
  for (const auto& s : suite) r.query_ids.push_back(s.query_id);
  std::array<bool, 3> want{};
  for (Arm a : arms) want[static_cast<int>(a)] = true;
  for (int a = 0; a < 3; ++a)
    if (want[a]) r.outcomes[a].assign(nq, std::vector<int>(n, 0));
  if (want[0]) r.auto_choice.assign(nq, std::vector<int>(n, 0));

  kernels::for_each_index(nq, ex, [&](std::size_t q) {
    const Guidance forced{GuidanceKind::forced_c, 0};
    for (int j = 0; j < n; ++j) {
      const auto key = static_cast<std::uint64_t>(j);
      auto run_arm = [&](int c) {
        Rng rng(derive_seed(seed, {q, key, static_cast<std::uint64_t>(c)}));
        return rollout::simulate(suite[q], p, q, c, forced, rng).reward;
      };
      std::array<int, 2> forced_out{-1, -1};
      for (int c = 0; c < 2; ++c)
        if (want[1 + c]) r.outcomes[1 + c][q][j] = forced_out[c] = run_arm(c);
      if (want[0]) {
        Rng pick(derive_seed(seed, {q, key, 2}));
        const int c = policy::sample_decision(p, q, pick);
        r.auto_choice[q][j] = c;
        r.outcomes[0][q][j] = forced_out[c] >= 0 ? forced_out[c] : run_arm(c);
      }
    }
  });
  return r;
}

std::string eval_text(const EvalResult& r) {
  validate(r);
  json arms = json::array();
  for (int a = 0; a < 3; ++a)
    if (!r.outcomes[a].empty()) arms.push_back(to_string(static_cast<Arm>(a)));
  std::vector<json> lines;
  lines.push_back(json{{"kind", "autocode.eval"},
                       {"n", r.n},
                       {"seed", r.seed},
                       {"temperature", r.temperature},
                       {"top_p", r.top_p},
                       {"arms", arms}});
  for (std::size_t q = 0; q < r.query_ids.size(); ++q) {
    json row{{"query_id", r.query_ids[q]}};
    for (int a = 0; a < 3; ++a)
      if (!r.outcomes[a].empty()) row[std::string(to_string(static_cast<Arm>(a)))] = r.outcomes[a][q];
    if (!r.auto_choice.empty()) row["auto_c"] = r.auto_choice[q];
    lines.push_back(std::move(row));
  }
  return dump_jsonl(lines);
}

EvalResult parse_eval(std::string_view text) {
  const auto lines = parse_jsonl(text);
  if (lines.empty() || lines[0].value("kind", "") != "autocode.eval") throw ParseError("not an eval file", 1);
  EvalResult r;
  try {
    r.n = lines[0].at("n").get<int>();
    r.seed = lines[0].at("seed").get<std::uint64_t>();
    r.temperature = lines[0].at("temperature").get<double>();
    r.top_p = lines[0].at("top_p").get<double>();
    std::vector<int> arms;
    for (const auto& a : lines[0].at("arms")) arms.push_back(static_cast<int>(parse_arm(a.get<std::string>())));
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto& row = lines[i];
      r.query_ids.push_back(row.at("query_id").get<std::string>());
      for (int a : arms)
        r.outcomes[a].push_back(row.at(std::string(to_string(static_cast<Arm>(a)))).get<std::vector<int>>());
      if (row.contains("auto_c")) r.auto_choice.push_back(row["auto_c"].get<std::vector<int>>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid eval file: ") + e.what(), 1);
  }
  validate(r);
  return r;
}

EvalResult eval_from_trajectories(std::span<const std::string> query_ids, int n,
                                  const std::array<std::vector<Trajectory>, 3>& per_arm) {
  EvalResult r;
  r.n = n;
  r.query_ids.assign(query_ids.begin(), query_ids.end());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < query_ids.size(); ++i) index[query_ids[i]] = i;
  for (int a = 0; a < 3; ++a) {
    if (per_arm[a].empty()) continue;
    std::vector<std::vector<int>> rows(query_ids.size());
    std::vector<std::vector<int>> choices(query_ids.size());
    for (const auto& t : per_arm[a]) {
      const auto it = index.find(t.query_id);
      if (it == index.end()) throw UnknownQuery(t.query_id);
      rows[it->second].push_back(t.reward);
      choices[it->second].push_back(t.decision.c);
    }
    r.outcomes[a] = std::move(rows);
    if (a == 0) r.auto_choice = std::move(choices);
  }
  validate(r);
  return r;
}

double pass_at_1(std::span<const std::vector<int>> outcomes, int n) {
  if (n < 1) throw InvalidArgument("pass@1 needs n >= 1");
  if (outcomes.empty()) return 0.0;
  std::vector<double> per(outcomes.size());
  for (std::size_t q = 0; q < outcomes.size(); ++q) {
    if (outcomes[q].size() < static_cast<std::size_t>(n)) throw MissingInput("query " + std::to_string(q) + " has fewer than n samples");
    int s = 0;
    for (int j = 0; j < n; ++j) s += outcomes[q][j];
    per[q] = static_cast<double>(s) / n;
  }
  return kernels::ordered_sum(per) / static_cast<double>(per.size());
}

SelectionReport selection_report(const EvalResult& r) {
  validate(r);
  if (!r.has(Arm::autonomous) || !r.has(Arm::cot) || !r.has(Arm::code))
    throw ShapeMismatch("selection report needs the auto, cot and code arms");
  SelectionReport s;
  s.auto_acc = pass_at_1(r.arm(Arm::autonomous), r.n);
  s.cot_acc = pass_at_1(r.arm(Arm::cot), r.n);
  s.code_acc = pass_at_1(r.arm(Arm::code), r.n);
  std::size_t solved = 0, hits = 0;
  for (std::size_t q = 0; q < r.query_ids.size(); ++q)
    for (int j = 0; j < r.n; ++j) {
      const int cot = r.arm(Arm::cot)[q][j], code = r.arm(Arm::code)[q][j];
      ++s.pairs;
      solved += (cot | code);
      if (cot != code) {
        ++s.decisive;
        hits += (r.auto_choice[q][j] == (code ? 1 : 0));
      }
    }
  s.union_bound = s.pairs ? static_cast<double>(solved) / static_cast<double>(s.pairs) : 0.0;
  if (s.decisive) s.selection_accuracy = static_cast<double>(hits) / static_cast<double>(s.decisive);
  return s;
}

std::string selection_report_csv(const SelectionReport& s) {
  std::string out = "auto_acc,cot_acc,code_acc,union_bound,selection_accuracy,decisive,pairs\n";
  out += format_double(s.auto_acc) + "," + format_double(s.cot_acc) + "," + format_double(s.code_acc) + "," +
         format_double(s.union_bound) + "," + (s.selection_accuracy ? format_double(*s.selection_accuracy) : "") +
         "," + std::to_string(s.decisive) + "," + std::to_string(s.pairs) + "\n";
  return out;
}

// --- invocation phases ---------------------------------------------------------------

PhaseBuckets invocation_histogram(std::span<const optim::InvocationSlice> slices,
                                  std::span<const std::string> query_ids, double low, double high, int n_phases) {
  if (n_phases < 1) throw InvalidArgument("need at least one phase");
  if (slices.empty()) throw InvalidArgument("no invocation slices");
  const std::size_t nq = query_ids.size();
  long budget = 0;
  for (const auto& s : slices) {
    if (s.code.size() != nq || s.total.size() != nq) throw ShapeMismatch("slice does not match the query set");
    if (s.interactions_end < s.interactions_begin) throw InvalidArgument("slice ends before it begins");
    budget = std::max(budget, s.interactions_end);
  }
  if (budget <= 0) throw InvalidArgument("invocation slices span no interactions");

  PhaseBuckets out;
  out.query_ids.assign(query_ids.begin(), query_ids.end());
  out.phases.resize(n_phases);
  std::vector<std::vector<long>> code(n_phases, std::vector<long>(nq, 0)), total(n_phases, std::vector<long>(nq, 0));
  std::vector<int> count(n_phases, 0);
  for (int k = 0; k < n_phases; ++k) {
    out.phases[k].begin = budget * k / n_phases;
    out.phases[k].end = budget * (k + 1) / n_phases;
  }
  for (const auto& s : slices) {
    const double mid = 0.5 * static_cast<double>(s.interactions_begin + s.interactions_end);
    const int k = std::min(n_phases - 1, static_cast<int>(n_phases * mid / static_cast<double>(budget)));
    ++count[k];
    for (std::size_t q = 0; q < nq; ++q) {
      code[k][q] += s.code[q];
      total[k][q] += s.total[q];
    }
  }
  for (int k = 0; k < n_phases; ++k) {
    if (count[k] == 0)
      throw InvalidArgument("phase " + std::to_string(k + 1) + " has no rollouts; fewer than " +
                            std::to_string(n_phases) + " distinguishable phases");
    auto& ph = out.phases[k];
    ph.rates.resize(nq);
    std::size_t seen = 0, extreme = 0;
    for (std::size_t q = 0; q < nq; ++q) {
      if (total[k][q] == 0) continue;
      const double rate = static_cast<double>(code[k][q]) / static_cast<double>(total[k][q]);
      ph.rates[q] = rate;
      // Integer binning so rates such as 3/10 land in their own bin exactly.
      ph.hist[std::min(9L, code[k][q] * 10 / total[k][q])] += 1;
      ++seen;
      extreme += (rate <= low || rate >= high);
    }
    ph.extremity = seen ? static_cast<double>(extreme) / static_cast<double>(seen) : 0.0;
  }
  return out;
}

optim::InvocationSlice slice_from_trajectories(std::span<const Trajectory> ts, std::span<const std::string> query_ids,
                                               long begin, long end) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < query_ids.size(); ++i) index[query_ids[i]] = i;
  optim::InvocationSlice s{begin, end, std::vector<int>(query_ids.size(), 0), std::vector<int>(query_ids.size(), 0)};
  for (const auto& t : ts) {
    const auto it = index.find(t.query_id);
    if (it == index.end()) throw UnknownQuery(t.query_id);
    s.code[it->second] += t.decision.c;
    s.total[it->second] += 1;
  }
  return s;
}

std::string invocation_hist_csv(const PhaseBuckets& b) {
  std::string out = "phase,begin,end,bin_lo,bin_hi,count,extremity\n";
  for (std::size_t k = 0; k < b.phases.size(); ++k) {
    const auto& ph = b.phases[k];
    for (int i = 0; i < 10; ++i)
      out += std::to_string(k + 1) + "," + std::to_string(ph.begin) + "," + std::to_string(ph.end) + "," +
             format_double(i / 10.0) + "," + format_double((i + 1) / 10.0) + "," + std::to_string(ph.hist[i]) + "," +
             format_double(ph.extremity) + "\n";
  }
  return out;
}

// --- efficiency curves ---------------------------------------------------------------------

namespace {

bool is_update_phase(const std::string& phase) { return phase == "mstep" || phase == "update" || phase == "sft"; }

}  // namespace

std::vector<std::pair<long, double>> trace_points(const Trace& t) {
  std::vector<std::pair<long, double>> pts;
  for (const auto& r : t.rows) {
    if (!is_update_phase(r.phase)) continue;
    if (!pts.empty() && r.interactions < pts.back().first)
      throw ShapeMismatch("trace '" + t.method + "' has decreasing interactions");
    pts.emplace_back(r.interactions, r.pass1_dev);
  }
  if (pts.empty()) throw ShapeMismatch("trace '" + t.method + "' has no update rows");
  return pts;
}

std::vector<Curve> efficiency_curves(std::span<const Trace> traces) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<std::pair<long, double>>>> by_method;
  for (const auto& t : traces) {
    if (!by_method.count(t.method)) order.push_back(t.method);
    by_method[t.method].push_back(trace_points(t));
  }
  std::vector<Curve> out;
  for (const auto& m : order) {
    const auto& runs = by_method[m];
    Curve c;
    c.method = m;
    c.seeds = runs.size();
    for (const auto& r : runs) {
      if (r.size() != runs[0].size()) throw ShapeMismatch("seeds of '" + m + "' have different lengths");
      for (std::size_t i = 0; i < r.size(); ++i)
        if (r[i].first != runs[0][i].first) throw ShapeMismatch("seeds of '" + m + "' use different interaction grids");
    }
    for (std::size_t i = 0; i < runs[0].size(); ++i) {
      std::vector<double> ys;
      for (const auto& r : runs) ys.push_back(r[i].second);
      CurvePoint pt;
      pt.interactions = runs[0][i].first;
      pt.mean = kernels::ordered_sum(ys) / static_cast<double>(ys.size());
      pt.lo = *std::min_element(ys.begin(), ys.end());
      pt.hi = *std::max_element(ys.begin(), ys.end());
      c.points.push_back(pt);
    }
    c.final_mean = c.points.back().mean;
    out.push_back(std::move(c));
  }
  return out;
}

std::string efficiency_csv(std::span<const Trace> traces) {
  std::string out = "method,seed,interactions,pass1\n";
  for (const auto& t : traces)
    for (const auto& [x, y] : trace_points(t))
      out += t.method + "," + std::to_string(t.seed) + "," + std::to_string(x) + "," + format_double(y) + "\n";
  return out;
}

std::optional<double> value_at(const Trace& t, long budget) {
  std::optional<double> v;
  for (const auto& [x, y] : trace_points(t))
    if (x <= budget) v = y;
  return v;
}

// --- rounds and statistics -------------------------------------------------------------------

std::map<int, std::size_t> round_distribution(std::span<const Trajectory> ts, int max_rounds) {
  std::map<int, std::size_t> d;
  for (int r = 0; r <= max_rounds; ++r) d[r] = 0;
  for (const auto& t : ts) d[std::clamp(t.rounds, 0, max_rounds)] += 1;
  return d;
}

std::string round_distribution_csv(const std::map<int, std::size_t>& d) {
  std::string out = "rounds,count\n";
  for (const auto& [r, n] : d) out += std::to_string(r) + "," + std::to_string(n) + "\n";
  return out;
}

namespace {

// P(X >= k) for X ~ Binomial(n, 1/2), summed in log space.
double upper_tail(std::size_t k, std::size_t n) {
  if (k == 0) return 1.0;
  double total = 0.0;
  for (std::size_t i = k; i <= n; ++i)
    total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  return std::min(1.0, total);
}

}  // namespace

SignTest sign_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("sign test needs paired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++t.wins;
    else if (a[i] < b[i]) ++t.losses;
    else ++t.ties;
  }
  const std::size_t n = t.wins + t.losses;
  t.p_greater = upper_tail(t.wins, n);
  t.p_two_sided = std::min(1.0, 2.0 * upper_tail(std::max(t.wins, t.losses), n));
  return t;
}

std::pair<double, double> binomial_ci(std::size_t successes, std::size_t n, double z) {
  if (successes > n) throw InvalidArgument("more successes than trials");
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n), ph = successes / nn, z2 = z * z;
  const double centre = (ph + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(ph * (1 - ph) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// --- charts ------------------------------------------------------------------------------------

namespace {

constexpr double kW = 640, kH = 400, kL = 60, kR = 150, kT = 40, kB = 50;
const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string header(std::string_view title, std::string_view data) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
                    "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<title>" + escape(title) + "</title>\n<desc>\n" + escape(data) + "</desc>\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(kW / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" + escape(title) +
         "</text>\n";
  return out;
}

std::string axes(std::string_view xlabel, std::string_view ylabel, double ymax) {
  const double x0 = kL, y0 = kH - kB, x1 = kW - kR, y1 = kT;
  std::string out = "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) +
                    "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) +
         "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = ymax * i / 4.0, y = y0 - (y0 - y1) * i / 4.0;
    out += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(v) + "</text>\n";
  }
  out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kH - 12) + "\" text-anchor=\"middle\">" +
         escape(xlabel) + "</text>\n";
  out += "<text x=\"14\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         num((y0 + y1) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  return out;
}

}  // namespace

std::string efficiency_svg(std::span<const Curve> curves, std::optional<double> optimum, std::string_view data_csv) {
  long xmax = 1;
  double ymax = optimum.value_or(0.0);
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      xmax = std::max(xmax, p.interactions);
      ymax = std::max(ymax, p.hi);
    }
  ymax = ymax > 0 ? std::min(1.0, std::ceil(ymax * 10.0 + 0.5) / 10.0) : 1.0;
  const double x0 = kL, y0 = kH - kB, x1 = kW - kR, y1 = kT;
  auto X = [&](double x) { return x0 + (x1 - x0) * x / static_cast<double>(xmax); };
  auto Y = [&](double y) { return y0 - (y0 - y1) * y / ymax; };

  std::string out = header("pass@1 vs interactions", data_csv);
  out += axes("interactions", "expected pass@1", ymax);
  out += "<text x=\"" + num(x1) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"end\">" + std::to_string(xmax) +
         "</text>\n";
  if (optimum) {
    out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(Y(*optimum)) + "\" x2=\"" + num(x1) + "\" y2=\"" +
           num(Y(*optimum)) + "\" stroke=\"black\" stroke-dasharray=\"2,3\"/>\n";
    out += "<text x=\"" + num(x1 + 4) + "\" y=\"" + num(Y(*optimum) + 4) + "\">optimum</text>\n";
  }
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const std::string color = kColors[i % 6];
    const bool flat = c.points.back().interactions == 0;
    if (flat) {
      out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(Y(c.final_mean)) + "\" x2=\"" + num(x1) + "\" y2=\"" +
             num(Y(c.final_mean)) + "\" stroke=\"" + color + "\" stroke-dasharray=\"6,4\"/>\n";
    } else {
      std::string band, line;
      for (const auto& p : c.points) band += num(X(p.interactions)) + "," + num(Y(p.hi)) + " ";
      for (auto it = c.points.rbegin(); it != c.points.rend(); ++it)
        band += num(X(it->interactions)) + "," + num(Y(it->lo)) + " ";
      for (const auto& p : c.points) line += num(X(p.interactions)) + "," + num(Y(p.mean)) + " ";
      out += "<polygon points=\"" + band + "\" fill=\"" + color + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
      out += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
      // asymptote marker at the final mean
      out += "<line x1=\"" + num(x1 - 20) + "\" y1=\"" + num(Y(c.final_mean)) + "\" x2=\"" + num(x1) + "\" y2=\"" +
             num(Y(c.final_mean)) + "\" stroke=\"" + color + "\" stroke-dasharray=\"3,2\"/>\n";
    }
    out += "<text x=\"" + num(x1 + 4) + "\" y=\"" + num(y1 + 16 * (i + 1)) + "\" fill=\"" + color + "\">" +
           escape(c.method) + " (" + num(c.final_mean) + ")</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string invocation_svg(const PhaseBuckets& b, std::string_view title) {
  int ymax = 1;
  for (const auto& ph : b.phases)
    for (int h : ph.hist) ymax = std::max(ymax, h);
  const double x0 = kL, y0 = kH - kB, x1 = kW - kR, y1 = kT;
  const double group = (x1 - x0) / 10.0, bar = group / (static_cast<double>(b.phases.size()) + 1.0);
  std::string out = header(title, invocation_hist_csv(b));
  out += axes("per-query code invocation rate", "queries", ymax);
  for (int i = 0; i <= 10; i += 2)
    out += "<text x=\"" + num(x0 + group * i) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" +
           num(i / 10.0) + "</text>\n";
  for (std::size_t k = 0; k < b.phases.size(); ++k) {
    const std::string color = kColors[k % 6];
    for (int i = 0; i < 10; ++i) {
      const double h = (y0 - y1) * b.phases[k].hist[i] / ymax;
      out += "<rect x=\"" + num(x0 + group * i + bar * (k + 0.5)) + "\" y=\"" + num(y0 - h) + "\" width=\"" +
             num(bar) + "\" height=\"" + num(h) + "\" fill=\"" + color + "\"/>\n";
    }
    out += "<text x=\"" + num(x1 + 4) + "\" y=\"" + num(y1 + 16 * (k + 1)) + "\" fill=\"" + color + "\">phase " +
           std::to_string(k + 1) + " (ext " + num(b.phases[k].extremity) + ")</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string selection_svg(const SelectionReport& s) {
  const std::pair<const char*, double> bars[] = {{"auto", s.auto_acc},
                                                 {"cot", s.cot_acc},
                                                 {"code", s.code_acc},
                                                 {"union", s.union_bound},
                                                 {"selection", s.selection_accuracy.value_or(0.0)}};
  const double x0 = kL, y0 = kH - kB, x1 = kW - kR, y1 = kT;
  const double w = (x1 - x0) / 5.0;
  std::string out = header("autonomous vs forced modality", selection_report_csv(s));
  out += axes("", "accuracy", 1.0);
  for (int i = 0; i < 5; ++i) {
    const double h = (y0 - y1) * bars[i].second;
    out += "<rect x=\"" + num(x0 + w * i + w * 0.15) + "\" y=\"" + num(y0 - h) + "\" width=\"" + num(w * 0.7) +
           "\" height=\"" + num(h) + "\" fill=\"" + kColors[i] + "\"/>\n";
    out += "<text x=\"" + num(x0 + w * (i + 0.5)) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" +
           bars[i].first + "</text>\n";
    out += "<text x=\"" + num(x0 + w * (i + 0.5)) + "\" y=\"" + num(y0 - h - 4) + "\" text-anchor=\"middle\">" +
           num(bars[i].second) + "</text>\n";
  }
  out += "<text x=\"" + num(x1 + 4) + "\" y=\"" + num(y1 + 16) + "\">decisive pairs " + std::to_string(s.decisive) +
         "</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace autocode::analysis
