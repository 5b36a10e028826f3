// Copyright 2026 The RLSR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <thread>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.hpp"
#include "rlsr/errors.hpp"
#include "rlsr/reward.hpp"
#include "rlsr/reward_server.hpp"

namespace rlsr::reward {
namespace {

using nlohmann::json;

std::string repeat(std::string_view unit, std::size_t times) {
  std::string out;
  for (std::size_t i = 0; i < times; ++i) out += unit;
  return out;
}

TEST(Reward, IdentityScoresOne) {
  CounterRng rng(1, 0);
  const RewardScorer scorer({});
  for (int i = 0; i < 100; ++i) {
    const auto r = testing::random_words(rng, 3 + rng.below(20));
    const auto b = scorer.score("prompt", r, r);
    EXPECT_NEAR(b.final_reward, 1.0, 1e-9);
    EXPECT_FALSE(b.penalty_triggered);
  }
}

TEST(Reward, RepetitiveResponseIsReplaced) {
  const auto b = score("p", repeat("ab", 200), std::string(100, 'r'), {});
  EXPECT_TRUE(b.penalty_triggered);
  EXPECT_EQ(b.lrs_length, 398u);
  EXPECT_EQ(b.final_reward, -1.0);
}

TEST(Reward, AdditivePenaltyStaysInRange) {
  RewardConfig cfg;
  cfg.penalty_mode = PenaltyMode::kAdditive;
  cfg.penalty_value = -0.5;
  const std::string ref = repeat("ab", 60);
  const auto b = score("p", repeat("ab", 200), ref, cfg);
  EXPECT_TRUE(b.penalty_triggered);
  EXPECT_NEAR(b.final_reward, b.cosine - 0.5, 1e-15);
  cfg.penalty_value = -1.0;
  EXPECT_GE(score("p", repeat("ab", 200), ref, cfg).final_reward, -1.0);
}

TEST(Reward, InvalidConfigAndEmptyReference) {
  RewardConfig cfg;
  cfg.penalty_value = 0.0;
  EXPECT_THROW(RewardScorer{cfg}, ContractError);
  cfg.penalty_value = -2.0;
  EXPECT_THROW(RewardScorer{cfg}, ContractError);
  EXPECT_THROW(score("p", "r", "", {}), ContractError);
}

TEST(Reward, UnrelatedFixtureIsLow) {
  const auto b = score("copy: ", "zq vkx wpj", "the brown fox jumps", {});
  EXPECT_GE(b.final_reward, 0.0);
  EXPECT_LE(b.final_reward, 0.5);
}

TEST(Reward, BoundedOnRandomInputs) {
  CounterRng rng(2, 0);
  const RewardScorer scorer({});
  for (int i = 0; i < 300; ++i) {
    const auto resp = rng.below(4) == 0 ? repeat(testing::random_string(rng, 2, 26), 100 + rng.below(100))
                                        : testing::random_string(rng, rng.below(200), 256);
    const auto ref = testing::random_string(rng, 1 + rng.below(200), 256);
    const auto b = scorer.score("p", resp, ref);
    EXPECT_GE(b.final_reward, -1.0);
    EXPECT_LE(b.final_reward, 1.0);
  }
}

TEST(Reward, EmbedWithPromptChangesTheTexts) {
  RewardConfig cfg;
  cfg.embed_with_prompt = true;
  EXPECT_NEAR(score("abc", "xyz", "xyz", cfg).final_reward, 1.0, 1e-9);
  EXPECT_GT(score("abc", "xyz", "uvw", cfg).cosine, score("abc", "xyz", "uvw", {}).cosine);
}

TEST(RewardGroup, OrderAndIdentity) {
  const RewardScorer scorer({});
  const std::vector<std::string> same(4, "hello there");
  const auto g = scorer.score_group("p", same, "hello world");
  for (const auto& b : g) EXPECT_EQ(b, g.front());

  const std::vector<std::string> pair{"hello world", "zq vkx wpj"};
  const auto ranked = scorer.score_group("p", pair, "hello world");
  EXPECT_GT(ranked[0].final_reward, ranked[1].final_reward);

  const std::vector<std::string> swapped{pair[1], pair[0]};
  const auto rs = scorer.score_group("p", swapped, "hello world");
  EXPECT_EQ(rs[0], ranked[1]);
  EXPECT_EQ(rs[1], ranked[0]);
  EXPECT_THROW(scorer.score_group("p", {}, "x"), ContractError);
}

TEST(RewardServer, HandleLineReplies) {
  const RewardServer server({});
  const auto ok = json::parse(
      server.handle_line(R"({"id":"1","prompt":"p","response":"r","reference":"r"})"));
  EXPECT_EQ(ok["id"], "1");
  EXPECT_NEAR(ok["reward"].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(ok["penalty"], false);

  EXPECT_EQ(json::parse(server.handle_line("{not json")), (json{{"id", nullptr}, {"error", "parse"}}));
  EXPECT_EQ(json::parse(server.handle_line(R"({"id":"2","prompt":"p","response":"r"})"))["error"],
            "missing field: reference");
  EXPECT_EQ(json::parse(server.handle_line(R"({"id":"3","prompt":"p","response":"r","reference":""})"))["error"],
            "empty reference");
  EXPECT_EQ(json::parse(server.handle_line(R"({"prompt":"p","response":"r","reference":"r"})"))["error"],
            "missing field: id");
}

TEST(RewardServer, WireScoresEqualInProcess) {
  RewardServer server({});
  const auto port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  const RewardScorer local({});
  CounterRng rng(5, 0);
  {
    RewardClient client("127.0.0.1", port);
    for (int i = 0; i < 200; ++i) {
      const auto p = testing::random_string(rng, rng.below(20), 256);
      const auto r = testing::random_string(rng, rng.below(80), i % 2 ? 26 : 256);
      const auto ref = testing::random_string(rng, 1 + rng.below(80), 26);
      ASSERT_EQ(client.score(p, r, ref), local.score(p, r, ref));
    }
  }
  server.stop();
}

TEST(RewardServer, ConcurrentClients) {
  RewardServer server({});
  const auto port = server.start("127.0.0.1", 0);
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      RewardClient client("127.0.0.1", port);
      CounterRng rng(6, t);
      const RewardScorer local({});
      for (int i = 0; i < 50; ++i) {
        const auto r = testing::random_words(rng, 4);
        const auto ref = testing::random_words(rng, 4);
        if (!(client.score("p", r, ref) == local.score("p", r, ref))) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  server.stop();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(RewardServer, BinaryFieldsUseBase64) {
  RewardServer server({});
  const auto port = server.start("127.0.0.1", 0);
  RewardClient client("127.0.0.1", port);
  // "\xff\xfe" base64 is "//4=".
  const auto reply = json::parse(client.request(
      R"({"id":"b","prompt":"p","response_b64":"//4=","reference_b64":"//4="})"));
  EXPECT_NEAR(reply["reward"].get<double>(), 1.0, 1e-9);
  const auto bad = json::parse(client.request("garbage"));
  EXPECT_EQ(bad["error"], "parse");
  server.stop();
}

TEST(RewardServer, BindFailureRaises) {
  RewardServer a({});
  const auto port = a.start("127.0.0.1", 0);
  RewardServer b({});
  EXPECT_THROW(b.start("127.0.0.1", port), IoError);
  a.stop();
}

}  // namespace
}  // namespace rlsr::reward
