#include <benchmark/benchmark.h>

#include "edgemesh/crdt.hpp"
#include "edgemesh/rng.hpp"

using namespace edgemesh;
using namespace edgemesh::crdt;

namespace {

CrdtState random_awset(Rng& rng, int ops) {
  CrdtState state = CrdtState::bottom(CrdtType::AWSet);
  const Bytes elems[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta"};
  for (int i = 0; i < ops; ++i) {
    const NodeId actor = 1 + rng.below(4);
    MutatorOp op = rng.chance(0.3) ? MutatorOp(RemoveElement{elems[rng.below(6)]})
                                   : MutatorOp(AddElement{elems[rng.below(6)]});
    state = mutate(state, op, actor).state;
  }
  return state;
}

void BM_GCounterJoin(benchmark::State& state) {
  Rng rng(1);
  GCounter a, b;
  for (NodeId n = 0; n < 64; ++n) {
    a.entries[n] = rng.below(1000);
    b.entries[n] = rng.below(1000);
  }
  const CrdtState sa(a), sb(b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(join(sa, sb));
  }
}
BENCHMARK(BM_GCounterJoin);

void BM_AWSetJoin(benchmark::State& state) {
  Rng rng(2);
  const CrdtState a = random_awset(rng, static_cast<int>(state.range(0)));
  const CrdtState b = random_awset(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(join(a, b));
  }
}
BENCHMARK(BM_AWSetJoin)->Arg(16)->Arg(128);

void BM_AWSetMutate(benchmark::State& state) {
  Rng rng(3);
  CrdtState s = random_awset(rng, 64);
  for (auto _ : state) {
    auto r = mutate(s, AddElement{"alpha"}, 1);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_AWSetMutate);

void BM_EncodeDecode(benchmark::State& state) {
  Rng rng(4);
  const CrdtState s = random_awset(rng, 128);
  for (auto _ : state) {
    const Bytes buf = encode(s);
    benchmark::DoNotOptimize(decode(buf));
  }
}
BENCHMARK(BM_EncodeDecode);

}  // namespace
