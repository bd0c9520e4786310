#include "fedlap/fednet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fedlap/errors.hpp"
#include "fedlap/kernels.hpp"
#include "fedlap/sha256.hpp"

namespace fedlap {

Backend parse_backend(const std::string& name) {
  if (name == "mock") return Backend::Mock;
  if (name == "mask") return Backend::Mask;
  throw ConfigError("unknown backend: " + name);
}

std::string backend_name(Backend b) { return b == Backend::Mock ? "mock" : "mask"; }

// ---------------------------------------------------------------- transcript

void Transcript::record(int round, int sender, int receiver, const std::string& kind,
                        int scalar_count, const std::string& sha) {
  log.push_back({round, sender, receiver, kind, scalar_count, sha});
}

void Transcript::record_decrypted(int party, int round, const std::string& kind,
                                  std::vector<double> values) {
  decrypted_views[party].push_back({round, kind, std::move(values)});
}

std::string Transcript::hash() const {
  std::ostringstream oss;
  for (const auto& m : log)
    oss << m.round << '|' << m.sender << '|' << m.receiver << '|' << m.kind << '|'
        << m.scalar_count << '|' << m.payload_sha256 << '\n';
  return sha256_hex(oss.str());
}

void Transcript::write_jsonl(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write " + path);
  for (const auto& m : log) {
    nlohmann::json j{{"round", m.round},   {"from", m.sender},
                     {"to", m.receiver},   {"kind", m.kind},
                     {"count", m.scalar_count}, {"sha256", m.payload_sha256}};
    out << j.dump() << "\n";
  }
}

// ----------------------------------------------------------------- backends

namespace {

constexpr double kFixedPointScale = 4294967296.0;  // 2^32

std::uint64_t encode_fixed(double v) {
  const double scaled = v * kFixedPointScale;
  if (!(std::abs(scaled) < 9.2e18))
    throw NumericError("mask backend: value out of fixed-point range");
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(scaled)));
}

double decode_fixed(std::uint64_t w) {
  return static_cast<double>(static_cast<std::int64_t>(w)) / kFixedPointScale;
}

std::uint64_t pair_mask_seed(std::uint64_t seed, std::uint64_t nonce, int a, int b) {
  return derive_seed(seed, "pair-mask",
                     (nonce << 20) ^ (static_cast<std::uint64_t>(a) << 10) ^
                         static_cast<std::uint64_t>(b));
}

std::string ciphertext_sha(const Ciphertext& ct) {
  return sha256_hex(ct.words.data(), ct.words.size() * sizeof(std::uint64_t));
}

}  // namespace

SecureAggregator::SecureAggregator(Backend backend, std::uint64_t seed)
    : backend_(backend), seed_(seed) {}

Ciphertext SecureAggregator::encrypt(const std::vector<double>& values,
                                     const AggregationGroup& group, int member,
                                     std::uint64_t nonce) const {
  Ciphertext ct;
  ct.count = static_cast<int>(values.size());
  ct.tag = backend_;
  ct.words.resize(values.size());
  if (backend_ == Backend::Mock) {
    std::memcpy(ct.words.data(), values.data(), values.size() * sizeof(double));
    return ct;
  }
  for (size_t i = 0; i < values.size(); ++i) ct.words[i] = encode_fixed(values[i]);
  // pairwise masks: +mask for the lower member id, -mask for the higher one,
  // canceling exactly (mod 2^64) in the full-group sum
  for (int other : group.members) {
    if (other == member) continue;
    const int lo = std::min(member, other);
    const int hi = std::max(member, other);
    Rng mask_rng(pair_mask_seed(seed_, nonce, lo, hi));
    const bool positive = (member == lo);
    for (size_t i = 0; i < values.size(); ++i) {
      const std::uint64_t m = mask_rng.next_u64();
      ct.words[i] += positive ? m : (0ull - m);
    }
  }
  return ct;
}

Ciphertext SecureAggregator::add(const Ciphertext& a, const Ciphertext& b) const {
  if (a.count != b.count || a.tag != b.tag)
    throw std::invalid_argument("ciphertext add: length or backend mismatch");
  Ciphertext out = a;
  if (backend_ == Backend::Mock) {
    for (int i = 0; i < a.count; ++i) {
      double xa, xb;
      std::memcpy(&xa, &a.words[i], sizeof(double));
      std::memcpy(&xb, &b.words[i], sizeof(double));
      const double s = xa + xb;
      std::memcpy(&out.words[i], &s, sizeof(double));
    }
  } else {
    for (int i = 0; i < a.count; ++i) out.words[i] = a.words[i] + b.words[i];
  }
  return out;
}

std::vector<double> SecureAggregator::decrypt_aggregate(const Ciphertext& aggregate) const {
  std::vector<double> out(static_cast<size_t>(aggregate.count));
  if (backend_ == Backend::Mock) {
    std::memcpy(out.data(), aggregate.words.data(), out.size() * sizeof(double));
  } else {
    for (int i = 0; i < aggregate.count; ++i) out[i] = decode_fixed(aggregate.words[i]);
  }
  return out;
}

// --------------------------------------------------------------- secure sum

std::vector<double> secure_sum(FedContext& ctx, const AggregationGroup& group,
                               const std::map<int, std::vector<double>>& contributions,
                               const std::string& kind, const std::vector<int>& recipients) {
  if (group.members.size() == 1) {
    // degenerate federation: the value never leaves the client
    auto it = contributions.find(group.members[0]);
    if (it == contributions.end())
      throw std::invalid_argument("secure_sum: missing contribution from member " +
                                  std::to_string(group.members[0]) + "; aggregate withheld");
    return it->second;
  }
  const std::uint64_t nonce = ctx.aggregation_counter++;
  std::optional<Ciphertext> aggregate;
  std::optional<size_t> length;
  for (int member : group.members) {
    auto it = contributions.find(member);
    if (it == contributions.end())
      throw std::invalid_argument("secure_sum: missing contribution from member " +
                                  std::to_string(member) + "; aggregate withheld");
    if (length && it->second.size() != *length)
      throw std::invalid_argument("secure_sum: contribution length mismatch");
    length = it->second.size();
    Ciphertext ct = ctx.aggregator.encrypt(it->second, group, member, nonce);
    ctx.transcript.record(ctx.round, member, -1, kind + "-contrib", ct.count,
                          ciphertext_sha(ct));
    aggregate = aggregate ? ctx.aggregator.add(*aggregate, ct) : std::move(ct);
  }
  std::vector<double> values = ctx.aggregator.decrypt_aggregate(*aggregate);
  const std::string agg_sha = ciphertext_sha(*aggregate);
  for (int recipient : recipients) {
    ctx.transcript.record(ctx.round, -1, recipient, kind + "-agg", aggregate->count, agg_sha);
    ctx.transcript.record_decrypted(recipient, ctx.round, kind + "-agg", values);
  }
  return values;
}

// --------------------------------------------------------- distributed ops

namespace {

AggregationGroup everyone(const std::vector<PartitionedView>& views) {
  AggregationGroup g;
  g.group_id = 0;
  for (const auto& view : views) g.members.push_back(view.client_id);
  return g;
}

std::vector<int> all_clients(const std::vector<PartitionedView>& views) {
  std::vector<int> all;
  for (const auto& view : views) all.push_back(view.client_id);
  return all;
}

// A_{V_i,V_k} q_{V_k}: client k's share of destination i's cross term,
// computed from its own adjacency rows only.
std::vector<double> cross_product_block(const PartitionedView& dest, const PartitionedView& src,
                                        const Eigen::VectorXd& q_src) {
  std::vector<double> out(static_cast<size_t>(dest.size()), 0.0);
  const auto& owner = *src.node_owner;
  for (int lu = 0; lu < src.size(); ++lu) {
    const double qv = q_src[lu];
    if (qv == 0.0) continue;
    for (int w : src.neighbors[lu])
      if (owner[w] == dest.client_id) out[static_cast<size_t>(dest.local(w))] += qv;
  }
  return out;
}

}  // namespace

std::vector<Eigen::VectorXd> distributed_matvec(FedContext& ctx,
                                                const std::vector<PartitionedView>& views,
                                                const std::vector<Eigen::VectorXd>& q_blocks) {
  const int k = static_cast<int>(views.size());
  if (static_cast<int>(q_blocks.size()) != k)
    throw std::invalid_argument("distributed_matvec: q block count does not match views");
  for (int i = 0; i < k; ++i)
    if (q_blocks[i].size() != views[i].size())
      throw std::invalid_argument("distributed_matvec: stale partition, block size mismatch");

  std::vector<Eigen::VectorXd> b(static_cast<size_t>(k));
  if (k == 1) {
    // no messages: local sparse matvec in the same arithmetic order as the
    // centralized kernel
    const auto& view = views[0];
    const Eigen::VectorXd& q = q_blocks[0];
    b[0].resize(view.size());
    for (int u = 0; u < view.size(); ++u) {
      double acc = 0.0;
      for (int w : view.neighbors[u]) acc += q[view.local(w)];
      b[0][u] = static_cast<double>(view.degree(u)) * q[u] - acc;
    }
    return b;
  }

  const AggregationGroup group = everyone(views);
  for (int i = 0; i < k; ++i) {
    std::map<int, std::vector<double>> contributions;
    for (int j = 0; j < k; ++j)
      contributions[views[j].client_id] = cross_product_block(views[i], views[j], q_blocks[j]);
    std::vector<double> tau =
        secure_sum(ctx, group, contributions, "matvec", {views[i].client_id});
    b[i].resize(views[i].size());
    for (int u = 0; u < views[i].size(); ++u)
      b[i][u] =
          static_cast<double>(views[i].degree(u)) * q_blocks[i][u] - tau[static_cast<size_t>(u)];
  }
  ++ctx.round;
  return b;
}

double distributed_inner_product(FedContext& ctx, const std::vector<PartitionedView>& views,
                                 const std::vector<Eigen::VectorXd>& x_blocks,
                                 const std::vector<Eigen::VectorXd>& y_blocks) {
  const int k = static_cast<int>(views.size());
  std::map<int, std::vector<double>> contributions;
  for (int i = 0; i < k; ++i) {
    if (x_blocks[i].size() != y_blocks[i].size())
      throw std::invalid_argument("distributed_inner_product: block length mismatch");
    contributions[views[i].client_id] = {
        kernels::dot(x_blocks[i].data(), y_blocks[i].data(),
                     static_cast<int>(x_blocks[i].size()), kernels::Exec::Serial)};
  }
  double value = secure_sum(ctx, everyone(views), contributions, "inner", all_clients(views))[0];
  ++ctx.round;
  return value;
}

double distributed_norm(FedContext& ctx, const std::vector<PartitionedView>& views,
                        const std::vector<Eigen::VectorXd>& x_blocks) {
  const int k = static_cast<int>(views.size());
  std::map<int, std::vector<double>> contributions;
  for (int i = 0; i < k; ++i)
    contributions[views[i].client_id] = {kernels::squared_norm(
        x_blocks[i].data(), static_cast<int>(x_blocks[i].size()), kernels::Exec::Serial)};
  double sq = secure_sum(ctx, everyone(views), contributions, "norm", all_clients(views))[0];
  ++ctx.round;
  return std::sqrt(std::max(0.0, sq));
}

// ------------------------------------------------- decentralized factorization

DecentralizedArnoldi decentralized_arnoldi(FedContext& ctx,
                                           const std::vector<PartitionedView>& views, int r,
                                           std::uint64_t seed) {
  const int k = static_cast<int>(views.size());
  int n = 0;
  for (const auto& view : views) n += view.size();
  if (r < 1 || r > n) throw std::invalid_argument("decentralized_arnoldi: need 1 <= r <= n");

  const AggregationGroup group = everyone(views);
  const std::vector<int> all = all_clients(views);

  auto publish_scalar = [&](const std::string& kind, auto partial_of) {
    std::map<int, std::vector<double>> contributions;
    for (int i = 0; i < k; ++i) contributions[views[i].client_id] = {partial_of(i)};
    double v = secure_sum(ctx, group, contributions, kind, all)[0];
    ++ctx.round;
    return v;
  };

  // operator scale ||L||_F for the invariant-subspace threshold; aggregated
  // so it never exposes a foreign degree sequence
  const double scale = std::sqrt(std::max(0.0, publish_scalar("scale", [&](int i) {
    double s = 0.0;
    for (int u = 0; u < views[i].size(); ++u) {
      const double d = views[i].degree(u);
      s += d * d + d;
    }
    return s;
  })));

  // shared-seed start vector: every party derives the global x and keeps its
  // own block, so agreeing on x costs no messages
  const Eigen::VectorXd x = arnoldi_start_vector(n, seed);
  std::vector<Eigen::VectorXd> block(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    block[i].resize(views[i].size());
    for (int u = 0; u < views[i].size(); ++u) block[i][u] = x[views[i].internal_nodes[u]];
  }
  const double x_norm = std::sqrt(std::max(0.0, publish_scalar("start-norm", [&](int i) {
    return kernels::squared_norm(block[i].data(), static_cast<int>(block[i].size()),
                                 kernels::Exec::Serial);
  })));
  if (!(x_norm > 0.0)) throw std::invalid_argument("decentralized_arnoldi: zero start vector");

  std::vector<Eigen::MatrixXd> q(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) {
    q[i].resize(views[i].size(), r);
    q[i].col(0) = block[i] / x_norm;
  }
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(r, r);

  DecentralizedArnoldi out;
  for (int l = 0; l < r; ++l) {
    std::vector<Eigen::VectorXd> ql(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) ql[i] = q[i].col(l);
    std::vector<Eigen::VectorXd> b = distributed_matvec(ctx, views, ql);

    // classical Gram-Schmidt, two passes; each pass aggregates l+1
    // coefficients in one batched message per client
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(l + 1);
    for (int pass = 0; pass < 2; ++pass) {
      std::map<int, std::vector<double>> contributions;
      for (int i = 0; i < k; ++i) {
        std::vector<double> partial(static_cast<size_t>(l) + 1);
        for (int t = 0; t <= l; ++t)
          partial[static_cast<size_t>(t)] = kernels::dot(q[i].col(t).data(), b[i].data(),
                                                         views[i].size(), kernels::Exec::Serial);
        contributions[views[i].client_id] = std::move(partial);
      }
      std::vector<double> sums = secure_sum(ctx, group, contributions, "orth", all);
      ++ctx.round;
      Eigen::VectorXd hvec(l + 1);
      for (int t = 0; t <= l; ++t) hvec[t] = sums[static_cast<size_t>(t)];
      for (int i = 0; i < k; ++i)
        kernels::subtract_projection(q[i], l + 1, hvec, b[i], kernels::Exec::Serial);
      coeff += hvec;
    }
    h.col(l).head(l + 1) = coeff;

    const double beta_sq = publish_scalar("norm", [&](int i) {
      return kernels::squared_norm(b[i].data(), views[i].size(), kernels::Exec::Serial);
    });
    const double beta = std::sqrt(std::max(0.0, beta_sq));
    if (beta < 1e-10 * std::max(scale, 1.0)) {
      // invariant subspace found: truncate to the converged steps
      out.h = h.topLeftCorner(l + 1, l + 1);
      out.q_blocks.resize(static_cast<size_t>(k));
      for (int i = 0; i < k; ++i) out.q_blocks[i] = q[i].leftCols(l + 1);
      out.residual_norm = 0.0;
      return out;
    }
    if (l + 1 < r) {
      h(l + 1, l) = beta;
      for (int i = 0; i < k; ++i) q[i].col(l + 1) = b[i] / beta;
    } else {
      out.h = h;
      out.q_blocks = q;
      out.residual_norm = beta;
      out.next_blocks.resize(static_cast<size_t>(k));
      for (int i = 0; i < k; ++i) out.next_blocks[i] = b[i] / beta;
    }
  }
  return out;
}

DecentralizedArnoldi decentralized_arnoldi(const std::vector<PartitionedView>& views, int r,
                                           std::uint64_t seed, Backend backend,
                                           Transcript* transcript_out) {
  FedContext ctx(backend, seed);
  DecentralizedArnoldi out = decentralized_arnoldi(ctx, views, r, seed);
  if (transcript_out) *transcript_out = std::move(ctx.transcript);
  return out;
}

std::vector<ClientBasis> client_bases(const DecentralizedArnoldi& dec, int r) {
  if (r < 1 || r > dec.steps())
    throw std::invalid_argument("client_bases: need 1 <= r <= steps");
  TridiagonalEig eig = hessenberg_eig(dec.h);
  std::vector<ClientBasis> out(dec.q_blocks.size());
  for (size_t i = 0; i < dec.q_blocks.size(); ++i) {
    out[i].u_rows = dec.q_blocks[i] * eig.vectors.leftCols(r);
    out[i].lambda = eig.values.head(r);
  }
  return out;
}

SpectralBasis assemble_basis(const std::vector<PartitionedView>& views,
                             const std::vector<ClientBasis>& bases) {
  int n = 0;
  for (const auto& view : views) n += view.size();
  SpectralBasis basis;
  basis.lambda = bases.at(0).lambda;
  basis.u.resize(n, bases[0].u_rows.cols());
  for (size_t i = 0; i < views.size(); ++i)
    for (int u = 0; u < views[i].size(); ++u)
      basis.u.row(views[i].internal_nodes[u]) = bases[i].u_rows.row(u);
  return basis;
}

// ---------------------------------------------------------------- accounting

namespace {
std::string phase_of(const std::string& kind) {
  for (const char* suffix : {"-contrib", "-agg"}) {
    const size_t len = std::strlen(suffix);
    if (kind.size() > len && kind.compare(kind.size() - len, len, suffix) == 0)
      return kind.substr(0, kind.size() - len);
  }
  return kind;
}
}  // namespace

std::vector<CommRow> comm_report(const Transcript& transcript) {
  std::map<std::pair<std::string, int>, long> acc;
  for (const auto& m : transcript.log) acc[{phase_of(m.kind), m.sender}] += m.scalar_count;
  std::vector<CommRow> rows;
  rows.reserve(acc.size());
  for (const auto& [key, scalars] : acc) rows.push_back({key.first, key.second, scalars});
  return rows;
}

long total_scalars(const Transcript& transcript) {
  long total = 0;
  for (const auto& m : transcript.log) total += m.scalar_count;
  return total;
}

void write_comm_csv(const std::string& path, const std::vector<CommRow>& rows,
                    const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw MissingArtifactError("cannot write " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "phase,party,scalars\n";
  for (const auto& row : rows) out << row.phase << "," << row.party << "," << row.scalars << "\n";
}

double fit_rkn_coefficient(const std::vector<RknSample>& samples) {
  double num = 0.0, den = 0.0;
  for (const auto& s : samples) {
    const double x = static_cast<double>(s.r) * s.k * s.n;
    num += x * static_cast<double>(s.scalars);
    den += x * x;
  }
  return den > 0.0 ? num / den : 0.0;
}

// --------------------------------------------------------------------- audit

AuditReport audit_confinement(const Transcript& transcript,
                              const std::vector<Eigen::MatrixXd>& q_blocks) {
  AuditReport report;
  auto flag = [&](const std::string& v) {
    report.ok = false;
    report.violations.push_back(v);
  };

  if (auto it = transcript.decrypted_views.find(-1); it != transcript.decrypted_views.end())
    if (!it->second.empty())
      flag("server decrypted " + std::to_string(it->second.size()) + " values");

  // hashes of every per-member contribution, by sender
  std::map<std::string, int> contrib_sender;
  for (const auto& m : transcript.log)
    if (m.receiver == -1) contrib_sender[m.payload_sha256] = m.sender;

  for (const auto& [party, seen] : transcript.decrypted_views) {
    if (party < 0) continue;
    for (const auto& sv : seen) {
      const std::string sha = sha256_hex(sv.values);
      auto it = contrib_sender.find(sha);
      if (it != contrib_sender.end() && it->second != party)
        flag("client " + std::to_string(party) + " holds raw contribution of client " +
             std::to_string(it->second) + " (kind " + sv.kind + ")");
      for (size_t j = 0; j < q_blocks.size(); ++j) {
        if (static_cast<int>(j) == party) continue;
        const auto& q = q_blocks[j];
        if (q.rows() == 0 || static_cast<size_t>(q.rows()) != sv.values.size()) continue;
        for (int c = 0; c < q.cols(); ++c) {
          bool equal = true;
          for (int u = 0; u < q.rows(); ++u)
            if (q(u, c) != sv.values[static_cast<size_t>(u)]) {
              equal = false;
              break;
            }
          if (equal)
            flag("client " + std::to_string(party) + " holds a q-block column of client " +
                 std::to_string(j));
        }
      }
    }
  }
  return report;
}

}  // namespace fedlap
