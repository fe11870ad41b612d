#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "oracles.hpp"
#include "tskd/ops.hpp"
#include "tskd/optim.hpp"
#include "tskd/schedule.hpp"

using namespace tskd;

namespace {

std::vector<int> range_except(int n, const std::set<int>& skip) {
  std::vector<int> out;
  for (int e = 0; e < n; ++e) {
    if (!skip.count(e)) out.push_back(e);
  }
  return out;
}

CnnSpec tiny() { return CnnSpec{"tiny", ModelRole::Student, {2, 2}, 1, 1, 8, 8, 3}; }

}  // namespace

TEST(Schedule, PaperClassificationCycle) {
  auto s = build_schedule(16, 5, 3, 0);
  EXPECT_EQ(s.epochs_of(NodeKind::Memory), (std::vector<int>{0, 5, 10}));
  EXPECT_EQ(s.epochs_of(NodeKind::Review), (std::vector<int>{15}));
  EXPECT_EQ(s.epochs_of(NodeKind::General), range_except(16, {0, 5, 10, 15}));
  EXPECT_TRUE(s.warning().empty());
}

TEST(Schedule, DeltaOneRepeats) {
  auto s = build_schedule(9, 1, 3, 0);
  EXPECT_EQ(s.epochs_of(NodeKind::Memory), (std::vector<int>{0, 1, 2, 4, 5, 6}));
  EXPECT_EQ(s.epochs_of(NodeKind::Review), (std::vector<int>{3, 7}));
  EXPECT_EQ(s.epochs_of(NodeKind::General), (std::vector<int>{8}));
}

TEST(Schedule, TwoHundredFortyEpochs) {
  auto s = build_schedule(240, 5, 3, 0);
  std::vector<int> want;
  for (int t = 15; t < 240; t += 16) want.push_back(t);
  EXPECT_EQ(want.size(), 15u);
  EXPECT_EQ(s.epochs_of(NodeKind::Review), want);
}

TEST(Schedule, ThirtyTwoEpochsHaveTwoReviews) {
  EXPECT_EQ(build_schedule(32, 5, 3, 0).epochs_of(NodeKind::Review), (std::vector<int>{15, 31}));
}

TEST(Schedule, WarmupIsGeneral) {
  auto s = build_schedule(30, 2, 2, 7);
  for (int e = 0; e < 7; ++e) EXPECT_EQ(s.kind(e), NodeKind::General);
  EXPECT_EQ(s.epochs_of(NodeKind::Memory).front(), 7);
  EXPECT_EQ(s.epochs_of(NodeKind::Review).front(), 11);
}

TEST(Schedule, TooShortIsAllGeneralWithWarning) {
  auto s = build_schedule(15, 5, 3, 0);
  EXPECT_FALSE(s.has_review());
  EXPECT_EQ(s.epochs_of(NodeKind::General).size(), 15u);
  EXPECT_FALSE(s.warning().empty());
}

TEST(Schedule, InvalidParameters) {
  EXPECT_THROW(build_schedule(10, 0, 3, 0), ConfigError);
  EXPECT_THROW(build_schedule(10, 2, 0, 0), ConfigError);
}

TEST(Schedule, PartitionAndMemoryPlacementProperty) {
  for (int total = 0; total <= 60; total += 3)
    for (int delta = 1; delta <= 5; ++delta)
      for (int k = 1; k <= 4; ++k)
        for (int warmup : {0, 1, 4}) {
          auto s = build_schedule(total, delta, k, warmup);
          const auto m = s.epochs_of(NodeKind::Memory), g = s.epochs_of(NodeKind::General),
                     r = s.epochs_of(NodeKind::Review);
          ASSERT_EQ(static_cast<int>(m.size() + g.size() + r.size()), total);
          std::set<int> all(m.begin(), m.end());
          all.insert(g.begin(), g.end());
          all.insert(r.begin(), r.end());
          ASSERT_EQ(static_cast<int>(all.size()), total);
          for (int t : r) {
            auto mem = s.memory_epochs_for(t);
            ASSERT_EQ(static_cast<int>(mem.size()), k);
            for (int j = 0; j < k; ++j) {
              EXPECT_EQ(mem[static_cast<std::size_t>(j)], t - (k - j) * delta);
              EXPECT_EQ(s.kind(mem[static_cast<std::size_t>(j)]), NodeKind::Memory);
            }
            EXPECT_TRUE(s.is_cycle_start(t - k * delta));
          }
          for (int e = 0; e < std::min(warmup, total); ++e) EXPECT_EQ(s.kind(e), NodeKind::General);
        }
}

TEST(Schedule, NodeKindCodes) {
  for (auto k : {NodeKind::Memory, NodeKind::General, NodeKind::Review}) {
    EXPECT_EQ(node_kind_from_code(node_kind_code(k)), k);
  }
  EXPECT_THROW(node_kind_from_code('X'), FormatError);
}

TEST(MemoryBank, FifoAndCycleReset) {
  auto s = build_schedule(32, 5, 3, 0);
  Cnn<float> net(tiny(), 1);
  MemoryBank<float> bank(3);
  for (int e : {0, 5, 10}) bank.memorize(e, net, s);
  EXPECT_EQ(bank.epochs(), (std::vector<int>{0, 5, 10}));
  EXPECT_TRUE(bank.full());
  bank.memorize(16, net, s);
  EXPECT_EQ(bank.epochs(), (std::vector<int>{16}));
}

TEST(MemoryBank, RejectsNonMemoryEpochAndOrder) {
  auto s = build_schedule(16, 5, 3, 0);
  Cnn<float> net(tiny(), 1);
  MemoryBank<float> bank(3);
  EXPECT_THROW(bank.memorize(3, net, s), ContractError);
  bank.push(5, net);
  EXPECT_THROW(bank.push(5, net), ContractError);
}

TEST(MemoryBank, PushEvictsOldest) {
  Cnn<float> net(tiny(), 1);
  MemoryBank<float> bank(2);
  for (int e : {1, 2, 3}) bank.push(e, net);
  EXPECT_EQ(bank.epochs(), (std::vector<int>{2, 3}));
}

TEST(MemoryBank, SnapshotUnchangedByLaterTraining) {
  Cnn<float> net(tiny(), 2);
  MemoryBank<float> bank(1);
  bank.push(0, net);
  const auto captured = bank.entries()[0].fingerprint;
  EXPECT_EQ(captured, net.fingerprint());
  SgdState<float> sgd{.learning_rate = 0.1f, .momentum = 0.9f};
  auto x = oracle::random_tensor<float>(Shape{4, 1, 8, 8}, 3, 0, 1);
  std::vector<int> labels{0, 1, 2, 0};
  for (int i = 0; i < 10; ++i) {
    backward(softmax_cross_entropy(net.forward(x).logits, std::span<const int>(labels)));
    auto ps = net.parameters();
    sgd_step(ps, sgd, 0);
  }
  EXPECT_NE(net.fingerprint(), captured);
  EXPECT_EQ(bank.entries()[0].model.fingerprint(), captured);
  EXPECT_TRUE(bank.entries()[0].model.frozen());
}
