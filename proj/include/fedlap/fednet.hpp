#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedlap/partition.hpp"
#include "fedlap/rng.hpp"
#include "fedlap/spectral.hpp"

namespace fedlap {

// Secure-aggregation backends. Both follow the same message pattern; only
// the payload encoding differs.
//   mock  plaintext pass-through, exact arithmetic
//   mask  fixed-point (scale 2^32) with seeded pairwise additive masks that
//         cancel in the sum; modular 64-bit accumulation
enum class Backend { Mock, Mask };
Backend parse_backend(const std::string& name);
std::string backend_name(Backend b);

struct Ciphertext {
  std::vector<std::uint64_t> words;
  int count = 0;  // encoded scalars
  Backend tag = Backend::Mock;
};

struct AggregationGroup {
  int group_id = 0;
  std::vector<int> members;
  int expected_contributions() const { return static_cast<int>(members.size()); }
};

// Ordered log of every message plus each party's view of the plaintexts it
// legitimately decrypted. Server is party -1. Append-only.
struct Transcript {
  struct Message {
    int round;
    int sender;
    int receiver;
    std::string kind;
    int scalar_count;
    std::string payload_sha256;
  };
  struct SeenValue {
    int round;
    std::string kind;
    std::vector<double> values;
  };

  std::vector<Message> log;
  std::map<int, std::vector<SeenValue>> decrypted_views;

  void record(int round, int sender, int receiver, const std::string& kind,
              int scalar_count, const std::string& sha);
  void record_decrypted(int party, int round, const std::string& kind,
                        std::vector<double> values);
  std::string hash() const;
  void write_jsonl(const std::string& path) const;
};

class SecureAggregator {
 public:
  SecureAggregator(Backend backend, std::uint64_t seed);

  Backend backend() const { return backend_; }
  // nonce must be unique per aggregation so pairwise masks are fresh
  Ciphertext encrypt(const std::vector<double>& values, const AggregationGroup& group,
                     int member, std::uint64_t nonce) const;
  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
  // valid once all members contributed; masks cancel only in the full sum
  std::vector<double> decrypt_aggregate(const Ciphertext& aggregate) const;

 private:
  Backend backend_;
  std::uint64_t seed_;
};

// Simulated fabric shared by one protocol run: backend, transcript, and a
// strict round counter acting as the barrier.
struct FedContext {
  SecureAggregator aggregator;
  Transcript transcript;
  int round = 0;
  // one fresh nonce per aggregation so pairwise masks are never reused
  std::uint64_t aggregation_counter = 0;

  FedContext(Backend backend, std::uint64_t seed)
      : aggregator(backend, derive_seed(seed, "secure-aggregation")) {}
};

// Element-wise sum of one contribution per group member, released to each
// recipient only as the aggregate. A single-member group short-circuits
// locally with no messages. Throws on a missing member (aggregate withheld)
// or contribution length mismatch.
std::vector<double> secure_sum(FedContext& ctx, const AggregationGroup& group,
                               const std::map<int, std::vector<double>>& contributions,
                               const std::string& kind, const std::vector<int>& recipients);

// b_{V_i} = D_{V_i,V_i} q_{V_i} - sum_j A_{V_i,V_j} q_{V_j}; the degree term
// is local, cross terms travel only as ciphertexts through secure_sum.
std::vector<Eigen::VectorXd> distributed_matvec(FedContext& ctx,
                                                const std::vector<PartitionedView>& views,
                                                const std::vector<Eigen::VectorXd>& q_blocks);

double distributed_inner_product(FedContext& ctx, const std::vector<PartitionedView>& views,
                                 const std::vector<Eigen::VectorXd>& x_blocks,
                                 const std::vector<Eigen::VectorXd>& y_blocks);
double distributed_norm(FedContext& ctx, const std::vector<PartitionedView>& views,
                        const std::vector<Eigen::VectorXd>& x_blocks);

// Decentralized Krylov factorization over the client views: matches the
// centralized arnoldi() run on the same Laplacian and start vector, while
// each client only ever holds its own Q rows, the shared H, and published
// norms.
struct DecentralizedArnoldi {
  std::vector<Eigen::MatrixXd> q_blocks;  // per client, n_i x steps
  Eigen::MatrixXd h;
  double residual_norm = 0.0;
  std::vector<Eigen::VectorXd> next_blocks;  // empty when residual_norm = 0
  int steps() const { return static_cast<int>(h.rows()); }
};

DecentralizedArnoldi decentralized_arnoldi(FedContext& ctx,
                                           const std::vector<PartitionedView>& views, int r,
                                           std::uint64_t seed);
// convenience wrapper that owns the context
DecentralizedArnoldi decentralized_arnoldi(const std::vector<PartitionedView>& views, int r,
                                           std::uint64_t seed, Backend backend,
                                           Transcript* transcript_out = nullptr);

// Per-client basis rows U_{V_i} = Q_{V_i,:} V from the shared H.
struct ClientBasis {
  Eigen::MatrixXd u_rows;   // n_i x r
  Eigen::VectorXd lambda;   // shared, ascending
};
std::vector<ClientBasis> client_bases(const DecentralizedArnoldi& dec, int r);
// Concatenation of per-client rows back into node order (simulator-side).
SpectralBasis assemble_basis(const std::vector<PartitionedView>& views,
                             const std::vector<ClientBasis>& bases);

// Communication accounting over a transcript. Phase = kind up to the last
// "-contrib"/"-agg" suffix; party = sender.
struct CommRow {
  std::string phase;
  int party;
  long scalars;
};
std::vector<CommRow> comm_report(const Transcript& transcript);
long total_scalars(const Transcript& transcript);
void write_comm_csv(const std::string& path, const std::vector<CommRow>& rows,
                    const std::string& header_comment = "");

// Least-squares fit of count ~ c * r * K * n over observed runs.
struct RknSample {
  int r, k, n;
  long scalars;
};
double fit_rkn_coefficient(const std::vector<RknSample>& samples);

// Knowledge-confinement audit: the server view must be empty, and no client
// view may contain another client's contribution payload or q-block column.
struct AuditReport {
  bool ok = true;
  std::vector<std::string> violations;
};
AuditReport audit_confinement(const Transcript& transcript,
                              const std::vector<Eigen::MatrixXd>& q_blocks);

}  // namespace fedlap
