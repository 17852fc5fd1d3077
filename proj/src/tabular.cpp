#include "darl1n/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace darl1n {

namespace {

constexpr double kResidualTol = 1e-10;
constexpr long kMaxSweeps = 2000000;

std::vector<int> sizes_of(const std::vector<int>& all, const std::vector<int>& ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int j : ids) out.push_back(all.at(size_t(j)));
  return out;
}

long product(const std::vector<int>& sizes) {
  long p = 1;
  for (int s : sizes) p *= s;
  return p;
}

// Joint transition probability factored over per-agent rows.
double joint_prob(const TabularMdp& mdp, const std::vector<int>& s_digits,
                  const std::vector<int>& a_digits,
                  const std::vector<int>& next_digits) {
  double p = 1.0;
  for (int i = 0; i < mdp.agents && p > 0.0; ++i) {
    long ls = local_state_index(mdp, i, s_digits);
    long row = ls * mdp.action_sizes[size_t(i)] + a_digits[size_t(i)];
    p *= mdp.transition[size_t(i)][size_t(row)][size_t(next_digits[size_t(i)])];
  }
  return p;
}

}  // namespace

long joint_state_count(const TabularMdp& mdp) { return product(mdp.state_sizes); }
long joint_action_count(const TabularMdp& mdp) { return product(mdp.action_sizes); }

long local_state_count(const TabularMdp& mdp, int agent) {
  return product(sizes_of(mdp.state_sizes, mdp.hoods.at(size_t(agent))));
}

long local_action_count(const TabularMdp& mdp, int agent) {
  return product(sizes_of(mdp.action_sizes, mdp.hoods.at(size_t(agent))));
}

std::vector<int> decode_digits(long idx, const std::vector<int>& sizes) {
  std::vector<int> digits(sizes.size());
  for (size_t k = 0; k < sizes.size(); ++k) {
    digits[k] = int(idx % sizes[k]);
    idx /= sizes[k];
  }
  if (idx != 0) throw std::out_of_range("index exceeds mixed-radix range");
  return digits;
}

long encode_digits(const std::vector<int>& digits, const std::vector<int>& sizes) {
  if (digits.size() != sizes.size())
    throw std::invalid_argument("digit count mismatch");
  long idx = 0, stride = 1;
  for (size_t k = 0; k < sizes.size(); ++k) {
    if (digits[k] < 0 || digits[k] >= sizes[k])
      throw std::out_of_range("digit exceeds its radix");
    idx += digits[k] * stride;
    stride *= sizes[k];
  }
  return idx;
}

long local_state_index(const TabularMdp& mdp, int agent,
                       const std::vector<int>& joint_state_digits) {
  const auto& hood = mdp.hoods.at(size_t(agent));
  std::vector<int> digits, sizes;
  for (int j : hood) {
    digits.push_back(joint_state_digits.at(size_t(j)));
    sizes.push_back(mdp.state_sizes[size_t(j)]);
  }
  return encode_digits(digits, sizes);
}

long local_action_index(const TabularMdp& mdp, int agent,
                        const std::vector<int>& joint_action_digits) {
  const auto& hood = mdp.hoods.at(size_t(agent));
  std::vector<int> digits, sizes;
  for (int j : hood) {
    digits.push_back(joint_action_digits.at(size_t(j)));
    sizes.push_back(mdp.action_sizes[size_t(j)]);
  }
  return encode_digits(digits, sizes);
}

void validate_mdp(const TabularMdp& mdp) {
  if (mdp.agents < 1) throw std::invalid_argument("mdp needs agents");
  if (mdp.gamma <= 0.0 || mdp.gamma >= 1.0)
    throw std::invalid_argument("discount must lie in (0,1)");
  if (mdp.reward_bound <= 0.0)
    throw std::invalid_argument("reward bound must be positive");
  size_t m = size_t(mdp.agents);
  if (mdp.state_sizes.size() != m || mdp.action_sizes.size() != m ||
      mdp.hoods.size() != m || mdp.transition.size() != m ||
      mdp.reward.size() != m)
    throw std::invalid_argument("per-agent table count mismatch");
  for (int i = 0; i < mdp.agents; ++i) {
    if (mdp.state_sizes[size_t(i)] < 1 || mdp.action_sizes[size_t(i)] < 1)
      throw std::invalid_argument("state/action spaces must be nonempty");
    const auto& hood = mdp.hoods[size_t(i)];
    if (!std::is_sorted(hood.begin(), hood.end()) ||
        std::adjacent_find(hood.begin(), hood.end()) != hood.end())
      throw std::invalid_argument("hood must be sorted and duplicate-free");
    if (!std::binary_search(hood.begin(), hood.end(), i))
      throw std::invalid_argument("hood must contain the agent");
    for (int j : hood)
      if (j < 0 || j >= mdp.agents) throw std::invalid_argument("hood member out of range");

    long rows = local_state_count(mdp, i) * mdp.action_sizes[size_t(i)];
    if (long(mdp.transition[size_t(i)].size()) != rows)
      throw std::invalid_argument("transition row count mismatch");
    for (const auto& row : mdp.transition[size_t(i)]) {
      if (long(row.size()) != mdp.state_sizes[size_t(i)])
        throw std::invalid_argument("transition row width mismatch");
      double sum = 0.0;
      for (double p : row) {
        if (p < 0.0) throw std::invalid_argument("negative transition probability");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("transition row does not sum to 1");
    }
    long sa = local_state_count(mdp, i) * local_action_count(mdp, i);
    if (long(mdp.reward[size_t(i)].size()) != sa)
      throw std::invalid_argument("reward table size mismatch");
    for (double r : mdp.reward[size_t(i)])
      if (std::fabs(r) > mdp.reward_bound + 1e-12)
        throw std::invalid_argument("reward exceeds the stated bound");
  }
}

namespace {

// Dense joint transition matrix and per-agent reward lookups, precomputed
// once per solve; the state spaces here stay tiny by construction.
struct JointTables {
  long S, A;
  std::vector<double> prob;          // [((s*A)+a)*S + s']
  std::vector<std::vector<double>> r;  // [agent][s*A + a]
};

JointTables build_joint(const TabularMdp& mdp) {
  validate_mdp(mdp);
  JointTables jt;
  jt.S = joint_state_count(mdp);
  jt.A = joint_action_count(mdp);
  jt.prob.assign(size_t(jt.S * jt.A * jt.S), 0.0);
  jt.r.assign(size_t(mdp.agents), std::vector<double>(size_t(jt.S * jt.A)));
  for (long s = 0; s < jt.S; ++s) {
    auto sd = decode_digits(s, mdp.state_sizes);
    for (long a = 0; a < jt.A; ++a) {
      auto ad = decode_digits(a, mdp.action_sizes);
      for (int i = 0; i < mdp.agents; ++i) {
        long ls = local_state_index(mdp, i, sd);
        long la = local_action_index(mdp, i, ad);
        jt.r[size_t(i)][size_t(s * jt.A + a)] =
            mdp.reward[size_t(i)][size_t(ls * local_action_count(mdp, i) + la)];
      }
      for (long sn = 0; sn < jt.S; ++sn) {
        auto nd = decode_digits(sn, mdp.state_sizes);
        jt.prob[size_t((s * jt.A + a) * jt.S + sn)] = joint_prob(mdp, sd, ad, nd);
      }
    }
  }
  return jt;
}

}  // namespace

std::vector<std::vector<double>> exact_q(const TabularMdp& mdp,
                                         const JointPolicy& policy) {
  JointTables jt = build_joint(mdp);
  if (long(policy.size()) != mdp.agents)
    throw std::invalid_argument("policy agent count mismatch");
  // joint action chosen by the policy in each state
  std::vector<long> pick(size_t(jt.S));
  for (long s = 0; s < jt.S; ++s) {
    std::vector<int> ad(size_t(mdp.agents));
    for (int i = 0; i < mdp.agents; ++i) {
      const auto& pi = policy[size_t(i)];
      if (long(pi.size()) != jt.S) throw std::invalid_argument("policy state count mismatch");
      ad[size_t(i)] = pi[size_t(s)];
    }
    pick[size_t(s)] = encode_digits(ad, mdp.action_sizes);
  }

  std::vector<std::vector<double>> q(size_t(mdp.agents),
                                     std::vector<double>(size_t(jt.S * jt.A), 0.0));
  for (int i = 0; i < mdp.agents; ++i) {
    auto& qi = q[size_t(i)];
    std::vector<double> next(qi.size());
    for (long sweep = 0;; ++sweep) {
      if (sweep > kMaxSweeps) throw std::runtime_error("value fixed point did not converge");
      double residual = 0.0;
      for (long s = 0; s < jt.S; ++s) {
        for (long a = 0; a < jt.A; ++a) {
          double acc = jt.r[size_t(i)][size_t(s * jt.A + a)];
          const double* row = &jt.prob[size_t((s * jt.A + a) * jt.S)];
          for (long sn = 0; sn < jt.S; ++sn) {
            if (row[sn] == 0.0) continue;
            acc += mdp.gamma * row[sn] * qi[size_t(sn * jt.A + pick[size_t(sn)])];
          }
          next[size_t(s * jt.A + a)] = acc;
          residual = std::max(residual, std::fabs(acc - qi[size_t(s * jt.A + a)]));
        }
      }
      qi.swap(next);
      if (residual < kResidualTol) break;
    }
  }
  return q;
}

ViResult value_iteration(const TabularMdp& mdp, int agent) {
  if (agent < 0 || agent >= mdp.agents)
    throw std::out_of_range("agent index out of range");
  JointTables jt = build_joint(mdp);
  ViResult res;
  res.q.assign(size_t(jt.S * jt.A), 0.0);
  std::vector<double> best(size_t(jt.S), 0.0);
  std::vector<double> next(res.q.size());
  for (long sweep = 0;; ++sweep) {
    if (sweep > kMaxSweeps) throw std::runtime_error("value iteration did not converge");
    double residual = 0.0;
    for (long s = 0; s < jt.S; ++s) {
      for (long a = 0; a < jt.A; ++a) {
        double acc = jt.r[size_t(agent)][size_t(s * jt.A + a)];
        const double* row = &jt.prob[size_t((s * jt.A + a) * jt.S)];
        for (long sn = 0; sn < jt.S; ++sn)
          if (row[sn] != 0.0) acc += mdp.gamma * row[sn] * best[size_t(sn)];
        next[size_t(s * jt.A + a)] = acc;
        residual = std::max(residual, std::fabs(acc - res.q[size_t(s * jt.A + a)]));
      }
    }
    res.q.swap(next);
    for (long s = 0; s < jt.S; ++s) {
      double b = res.q[size_t(s * jt.A)];
      for (long a = 1; a < jt.A; ++a)
        b = std::max(b, res.q[size_t(s * jt.A + a)]);
      best[size_t(s)] = b;
    }
    if (residual < kResidualTol) break;
  }
  res.greedy.assign(size_t(jt.S), 0);
  for (long s = 0; s < jt.S; ++s) {
    long arg = 0;
    for (long a = 1; a < jt.A; ++a)
      if (res.q[size_t(s * jt.A + a)] > res.q[size_t(s * jt.A + arg)]) arg = a;
    res.greedy[size_t(s)] = int(arg);
  }
  return res;
}

std::vector<double> truncated_q(const TabularMdp& mdp,
                                const std::vector<double>& q_full, int agent,
                                const TruncationWeights& weights) {
  validate_mdp(mdp);
  if (agent < 0 || agent >= mdp.agents)
    throw std::out_of_range("agent index out of range");
  long S = joint_state_count(mdp), A = joint_action_count(mdp);
  if (long(q_full.size()) != S * A)
    throw std::invalid_argument("full q table has wrong size");

  const auto& hood = mdp.hoods[size_t(agent)];
  std::vector<int> excl;
  for (int j = 0; j < mdp.agents; ++j)
    if (!std::binary_search(hood.begin(), hood.end(), j)) excl.push_back(j);

  auto hood_ssz = sizes_of(mdp.state_sizes, hood);
  auto hood_asz = sizes_of(mdp.action_sizes, hood);
  auto excl_ssz = sizes_of(mdp.state_sizes, excl);
  auto excl_asz = sizes_of(mdp.action_sizes, excl);
  long LS = product(hood_ssz), LA = product(hood_asz);
  long ES = product(excl_ssz), EA = product(excl_asz);

  std::vector<double> out(size_t(LS * LA), 0.0);
  std::vector<int> sd(size_t(mdp.agents)), ad(size_t(mdp.agents));
  for (long ls = 0; ls < LS; ++ls) {
    auto lsd = decode_digits(ls, hood_ssz);
    for (long la = 0; la < LA; ++la) {
      auto lad = decode_digits(la, hood_asz);
      double acc = 0.0, wsum = 0.0;
      for (long es = 0; es < ES; ++es) {
        auto esd = decode_digits(es, excl_ssz);
        for (long ea = 0; ea < EA; ++ea) {
          auto ead = decode_digits(ea, excl_asz);
          double w = weights ? weights(ls * LA + la, es * EA + ea)
                             : 1.0 / double(ES * EA);
          if (w < 0.0) throw std::invalid_argument("negative truncation weight");
          wsum += w;
          for (size_t k = 0; k < hood.size(); ++k) {
            sd[size_t(hood[k])] = lsd[k];
            ad[size_t(hood[k])] = lad[k];
          }
          for (size_t k = 0; k < excl.size(); ++k) {
            sd[size_t(excl[k])] = esd[k];
            ad[size_t(excl[k])] = ead[k];
          }
          long s = encode_digits(sd, mdp.state_sizes);
          long a = encode_digits(ad, mdp.action_sizes);
          acc += w * q_full[size_t(s * A + a)];
        }
      }
      if (std::fabs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("truncation weights do not sum to 1");
      out[size_t(ls * LA + la)] = acc;
    }
  }
  return out;
}

double truncation_bound(double reward_bound, double gamma) {
  if (gamma <= 0.0 || gamma >= 1.0)
    throw std::invalid_argument("discount must lie in (0,1)");
  if (reward_bound <= 0.0)
    throw std::invalid_argument("reward bound must be positive");
  return 2.0 * reward_bound * gamma / (1.0 - gamma);
}

TabularMdp random_local_mdp(int agents, int states, int actions, double gamma,
                            double reward_bound, uint64_t seed) {
  if (agents < 1 || states < 1 || actions < 1)
    throw std::invalid_argument("sizes must be positive");
  TabularMdp mdp;
  mdp.agents = agents;
  mdp.gamma = gamma;
  mdp.reward_bound = reward_bound;
  mdp.state_sizes.assign(size_t(agents), states);
  mdp.action_sizes.assign(size_t(agents), actions);
  Rng rng(derive_stream(seed, 0xfadedull, uint64_t(agents)));
  for (int i = 0; i < agents; ++i) {
    std::vector<int> hood;
    if (i > 0) hood.push_back(i - 1);
    hood.push_back(i);
    if (i + 1 < agents) hood.push_back(i + 1);
    mdp.hoods.push_back(hood);
  }
  for (int i = 0; i < agents; ++i) {
    long rows = local_state_count(mdp, i) * actions;
    std::vector<std::vector<double>> t(static_cast<size_t>(rows),
                                       std::vector<double>(static_cast<size_t>(states)));
    for (auto& row : t) {
      double sum = 0.0;
      for (double& p : row) {
        p = rng.uniform() + 1e-3;  // keep rows strictly positive
        sum += p;
      }
      for (double& p : row) p /= sum;
    }
    mdp.transition.push_back(std::move(t));
    long sa = local_state_count(mdp, i) * local_action_count(mdp, i);
    std::vector<double> r(static_cast<size_t>(sa));
    for (double& v : r) v = rng.uniform(-reward_bound, reward_bound);
    mdp.reward.push_back(std::move(r));
  }
  validate_mdp(mdp);
  return mdp;
}

WalkReport check_containment(JointState start, const StepFn& step,
                             const GraphConfig& cfg, long steps, Rng& rng) {
  WalkReport rep;
  JointState cur = std::move(start);
  const int m = int(cur.size());
  for (long t = 0; t < steps; ++t) {
    std::vector<std::vector<int>> potential(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i)
      potential[size_t(i)] = potential_neighbors(cur, cfg, i);
    JointState next = step(cur, rng);
    if (int(next.size()) != m)
      throw std::invalid_argument("step changed the agent count");
    for (int i = 0; i < m; ++i)
      if (!validate_motion(cur[size_t(i)], next[size_t(i)], cfg))
        rep.motion_violations += 1;
    for (int i = 0; i < m; ++i) {
      auto hood = one_hop_neighbors(next, cfg, i);
      for (int j : hood)
        if (!std::binary_search(potential[size_t(i)].begin(),
                                potential[size_t(i)].end(), j))
          rep.containment_violations += 1;
    }
    cur = std::move(next);
    rep.steps += 1;
  }
  return rep;
}

}  // namespace darl1n
