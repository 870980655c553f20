/*
 *    Copyright 2026 The tlpsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "tlpsim/cache.hpp"
#include "tlpsim/config.hpp"
#include "tlpsim/dram.hpp"
#include "tlpsim/offchip.hpp"
#include "tlpsim/page_map.hpp"
#include "tlpsim/prefetch.hpp"
#include "tlpsim/stats.hpp"
#include "tlpsim/trace.hpp"

namespace tlpsim
{

/*
 * Trace-driven timing model.
 *
 * Each core issues memory operations in trace order through a window of
 * `core.window` outstanding operations that retire in order. Gap
 * instructions advance the front end at `core.width` per cycle. Cache state
 * is updated in program order; every block carries the cycle its data
 * arrives, so a hit on a line still in flight waits for it. Predictor
 * training for an operation is applied once it has left the window, which
 * keeps learning independent of timing.
 *
 * Caches are non-inclusive: a miss fills every level between the one that
 * served it and the L1D; dirty victims are written into the next level.
 * Speculative DRAM requests never fill caches.
 */

class InvariantViolation : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

struct SimOptions {
  // false removes the off-chip module entirely (only meaningful for the
  // baseline variant, whose controller never acts).
  bool offchip_module = true;
};

namespace detail
{

struct FlpTraining {
  RequestMetadata metadata;
  std::uint64_t vaddr;
  Level served;
  bool predicted;
};

struct SlpTraining {
  RequestMetadata metadata;
  std::uint64_t paddr;
  Level served;
};

struct PendingTraining {
  std::size_t due; // op index before which this is applied
  std::variant<FlpTraining, SlpTraining> what;
};

struct CoreState {
  CoreState(unsigned id_, std::span<const TraceRecord> trace_, const SimConfig& cfg, const SimOptions& opt)
      : id(id_), trace(trace_), l1d(cfg.l1d), l2(cfg.l2), l1d_mshr(cfg.l1d.mshr), l2_mshr(cfg.l2.mshr),
        l1d_pf(cfg.prefetch.l1d, cfg.prefetch.l1d_degree, cfg.prefetch.l1d_next_line_fallback, cfg.page_size),
        l2_pf(cfg.prefetch.l2_degree, cfg.page_size), pages(cfg.page_size, cfg.page_seed, std::uint64_t{id_} << 28),
        retire_ring(cfg.core.window, 0)
  {
    if (opt.offchip_module || cfg.variant != VariantName::Baseline)
      ctrl.emplace(cfg.variant, cfg.perceptron, cfg.page_size, cfg.core.predictor_latency);
  }

  unsigned id;
  std::span<const TraceRecord> trace;
  std::size_t next = 0;

  Cache l1d, l2;
  Mshr l1d_mshr, l2_mshr;
  L1dPrefetcher l1d_pf;
  StreamPrefetcher l2_pf;
  PageMap pages;
  std::optional<OffchipController> ctrl;

  std::vector<std::uint64_t> retire_ring;
  std::uint64_t last_issue = 0;
  std::uint64_t last_retire = 0;
  std::uint64_t frac = 0; // leftover instructions toward the next cycle
  std::deque<PendingTraining> training;

  SimStats stats;

  bool done() const { return next >= trace.size(); }
};

} // namespace detail

class System
{
public:
  System(const SimConfig& cfg, std::span<const std::span<const TraceRecord>> traces, SimOptions opt = {})
      : cfg_(cfg), llc_(shared_llc(cfg)), llc_mshr_(std::size_t{cfg.llc.mshr} * cfg.cores), dram_(cfg.dram, cfg.cores)
  {
    cfg_.validate();
    if (traces.size() != cfg.cores)
      throw std::invalid_argument("one trace per core required");
    for (unsigned c = 0; c < cfg.cores; ++c)
      cores_.emplace_back(c, traces[c], cfg_, opt);
  }

  SimStats run()
  {
    for (;;) {
      detail::CoreState* pick = nullptr;
      std::uint64_t best = 0;
      for (auto& core : cores_) {
        if (core.done())
          continue;
        std::uint64_t t = peek_issue(core);
        if (pick == nullptr || t < best) {
          pick = &core;
          best = t;
        }
      }
      if (pick == nullptr)
        break;
      step(*pick);
    }
    return collect();
  }

private:
  static CacheGeometry shared_llc(const SimConfig& cfg)
  {
    CacheGeometry g = cfg.llc;
    g.capacity *= cfg.cores;
    g.mshr *= cfg.cores;
    return g;
  }

  std::uint64_t advance_of(const detail::CoreState& core, const TraceRecord& r) const
  {
    return (core.frac + r.gap + 1) / cfg_.core.width;
  }

  std::uint64_t peek_issue(const detail::CoreState& core) const
  {
    const auto& r = core.trace[core.next];
    std::uint64_t t = core.last_issue + advance_of(core, r);
    if (core.next >= cfg_.core.window)
      t = std::max(t, core.retire_ring[core.next % cfg_.core.window]);
    return t;
  }

  void drain_training(detail::CoreState& core)
  {
    while (!core.training.empty() && core.training.front().due <= core.next) {
      auto& p = core.training.front();
      if (auto* f = std::get_if<detail::FlpTraining>(&p.what))
        core.ctrl->flp_on_complete(f->metadata, f->vaddr, f->served, f->predicted);
      else {
        auto& s = std::get<detail::SlpTraining>(p.what);
        core.ctrl->slp_on_prefetch_fill(s.metadata, s.paddr, s.served);
      }
      core.training.pop_front();
    }
  }

  void step(detail::CoreState& core)
  {
    drain_training(core);
    const auto& r = core.trace[core.next];
    const std::uint64_t issue = peek_issue(core);
    core.frac = (core.frac + r.gap + 1) % cfg_.core.width;
    core.last_issue = issue;
    core.stats.instructions += std::uint64_t{r.gap} + 1;

    std::uint64_t complete = r.kind == AccessKind::Load ? do_load(core, r, issue) : do_store(core, r, issue);
    if (complete < issue)
      throw InvariantViolation("operation completed before it issued");

    const std::uint64_t retire = std::max(core.last_retire, complete);
    core.last_retire = retire;
    core.retire_ring[core.next % cfg_.core.window] = retire;
    ++core.next;
  }

  // Demand hit accounting for a block filled by a prefetch.
  static void note_useful(Block& b, PrefetchCounters& pc)
  {
    if (!b.prefetched)
      return;
    b.prefetched = false;
    ++pc.useful;
    ++pc.useful_from[static_cast<std::size_t>(b.fill_level)];
  }

  void note_eviction(const Eviction& e, PrefetchCounters& pc)
  {
    if (!e.prefetched)
      return;
    ++pc.useless;
    ++pc.useless_from[static_cast<std::size_t>(e.fill_level)];
  }

  void fill_llc(detail::CoreState& core, std::uint64_t paddr, bool dirty, const FillInfo& info, std::uint64_t now)
  {
    if (auto ev = llc_.fill(paddr, dirty, info); ev && ev->dirty)
      dram_.write(ev->line, now, core.id);
  }

  void fill_l2(detail::CoreState& core, std::uint64_t paddr, bool dirty, const FillInfo& info, std::uint64_t now)
  {
    auto ev = core.l2.fill(paddr, dirty, info);
    if (!ev)
      return;
    note_eviction(*ev, core.stats.l2_pf);
    if (ev->dirty)
      writeback_llc(core, ev->line << kLineBits, now);
  }

  void fill_l1d(detail::CoreState& core, std::uint64_t paddr, bool dirty, const FillInfo& info, std::uint64_t now)
  {
    auto ev = core.l1d.fill(paddr, dirty, info);
    if (!ev)
      return;
    note_eviction(*ev, core.stats.l1d_pf);
    if (ev->dirty)
      writeback_l2(core, ev->line << kLineBits, now);
  }

  void writeback_llc(detail::CoreState& core, std::uint64_t paddr, std::uint64_t now)
  {
    if (Block* b = llc_.find(paddr)) {
      b->dirty = true;
      return;
    }
    fill_llc(core, paddr, true, {now, false, Level::L2}, now);
  }

  void writeback_l2(detail::CoreState& core, std::uint64_t paddr, std::uint64_t now)
  {
    if (Block* b = core.l2.find(paddr)) {
      b->dirty = true;
      return;
    }
    fill_l2(core, paddr, true, {now, false, Level::L1D}, now);
  }

  struct Served {
    Level level;
    std::uint64_t ready;
  };

  // Resolves an L1D miss (demand or L1D prefetch) in L2, LLC, or DRAM and
  // fills L2/LLC on the way back. The L1D fill is left to the caller.
  Served fetch_below_l1d(detail::CoreState& core, std::uint64_t paddr, std::uint64_t now, bool demand, bool store,
                         const RequestMetadata& meta)
  {
    const std::uint64_t t1 = core.l1d_mshr.acquire(now);
    Served out{Level::L2, 0};
    auto& st = core.stats;

    if (demand)
      ++st.l2.accesses;
    auto r2 = core.l2.lookup(paddr);
    if (r2.hit) {
      if (demand) {
        ++st.l2.hits;
        note_useful(*r2.block, st.l2_pf);
      }
      out = {Level::L2, std::max<std::uint64_t>(t1 + cfg_.l2.latency, r2.block->ready)};
    } else {
      if (demand)
        ++st.l2.misses;
      const std::uint64_t t2 = core.l2_mshr.acquire(t1 + cfg_.l2.latency);
      const std::uint32_t llc_lat = store ? cfg_.llc_store_latency : cfg_.llc.latency;
      if (demand)
        ++st.llc.accesses;
      auto r3 = llc_.lookup(paddr);
      if (r3.hit) {
        if (demand)
          ++st.llc.hits;
        out = {Level::LLC, std::max<std::uint64_t>(t2 + llc_lat, r3.block->ready)};
      } else {
        if (demand)
          ++st.llc.misses;
        const std::uint64_t t3 = llc_mshr_.acquire(t2 + llc_lat);
        auto d = dram_.read(line_of(paddr), t3, demand ? DramSource::Demand : DramSource::Prefetch, core.id);
        llc_mshr_.insert({line_of(paddr), d.completion, meta, !demand});
        out = {Level::DRAM, d.completion};
        fill_llc(core, paddr, false, {d.completion, false, Level::DRAM}, t3);
      }
      core.l2_mshr.insert({line_of(paddr), out.ready, meta, !demand});
      fill_l2(core, paddr, false, {out.ready, false, out.level}, t2);
    }
    core.l1d_mshr.insert({line_of(paddr), out.ready, meta, !demand});

    // The L2 prefetcher sees every L2 access, including L1D prefetches.
    if (cfg_.prefetch.l2 == L2PrefetcherKind::Stream)
      for (const auto& req : core.l2_pf.on_access(paddr, r2.hit))
        issue_l2_prefetch(core, req.target_addr, t1 + cfg_.l2.latency);
    return out;
  }

  void issue_l2_prefetch(detail::CoreState& core, std::uint64_t paddr, std::uint64_t now)
  {
    auto& pc = core.stats.l2_pf;
    ++pc.emitted;
    ++pc.issued;
    if (core.l2.find(paddr) != nullptr) {
      ++pc.redundant;
      return;
    }
    const std::uint64_t t2 = core.l2_mshr.acquire(now);
    Served out{Level::LLC, 0};
    if (auto r3 = llc_.lookup(paddr); r3.hit) {
      out = {Level::LLC, std::max<std::uint64_t>(t2 + cfg_.llc.latency, r3.block->ready)};
    } else {
      const std::uint64_t t3 = llc_mshr_.acquire(t2 + cfg_.llc.latency);
      auto d = dram_.read(line_of(paddr), t3, DramSource::Prefetch, core.id);
      llc_mshr_.insert({line_of(paddr), d.completion, {}, true});
      out = {Level::DRAM, d.completion};
      fill_llc(core, paddr, false, {d.completion, false, Level::DRAM}, t3);
    }
    core.l2_mshr.insert({line_of(paddr), out.ready, {}, true});
    fill_l2(core, paddr, false, {out.ready, true, out.level}, t2);
    ++pc.filled;
    ++pc.filled_from[static_cast<std::size_t>(out.level)];
  }

  void issue_l1d_prefetch(detail::CoreState& core, const PrefetchRequest& req, const LoadPrediction& trigger, std::uint64_t now)
  {
    auto& pc = core.stats.l1d_pf;
    ++pc.emitted;
    const std::uint64_t paddr = core.pages.translate(req.target_addr);
    SlpOutcome verdict{true, 0, trigger.metadata};
    if (core.ctrl)
      verdict = core.ctrl->slp_filter(trigger.metadata, paddr, trigger.flp_tag);
    if (!verdict.issue) {
      ++pc.dropped;
      return;
    }
    ++pc.issued;
    if (core.l1d.find(paddr) != nullptr) {
      ++pc.redundant;
      return;
    }
    auto served = fetch_below_l1d(core, paddr, now, false, false, verdict.metadata);
    fill_l1d(core, paddr, false, {served.ready, true, served.level}, now);
    ++pc.filled;
    ++pc.filled_from[static_cast<std::size_t>(served.level)];
    if (core.ctrl && core.ctrl->variant().slp_enabled)
      core.training.push_back({core.next + cfg_.core.window, detail::SlpTraining{verdict.metadata, paddr, served.level}});
  }

  std::uint64_t do_load(detail::CoreState& core, const TraceRecord& r, std::uint64_t issue)
  {
    auto& st = core.stats;
    ++st.loads;
    const std::uint64_t paddr = core.pages.translate(r.vaddr);

    LoadPrediction pred;
    if (core.ctrl)
      pred = core.ctrl->flp_on_load(r.pc, r.vaddr, issue);
    std::optional<DramResult> spec;
    if (pred.speculative_at)
      spec = dram_.read(line_of(paddr), *pred.speculative_at, DramSource::Speculative, core.id);

    ++st.l1d.accesses;
    Level served = Level::L1D;
    std::uint64_t complete = 0;
    auto r1 = core.l1d.lookup(paddr);
    if (r1.hit) {
      ++st.l1d.hits;
      note_useful(*r1.block, st.l1d_pf);
      complete = std::max<std::uint64_t>(issue + cfg_.l1d.latency, r1.block->ready);
    } else {
      ++st.l1d.misses;
      const std::uint64_t miss_known = issue + cfg_.l1d.latency;
      if (core.ctrl)
        if (auto at = core.ctrl->flp_on_l1d_miss(pred, miss_known))
          spec = dram_.read(line_of(paddr), *at, DramSource::Speculative, core.id);
      auto s = fetch_below_l1d(core, paddr, miss_known, true, false, pred.metadata);
      served = s.level;
      complete = s.ready;
      fill_l1d(core, paddr, false, {s.ready, false, s.level}, miss_known);
    }
    ++st.demand_served[static_cast<std::size_t>(served)];

    if (spec) {
      ++st.speculative_issued;
      ++st.speculative_location[static_cast<std::size_t>(served)];
      if (served == Level::DRAM && spec->completion <= complete) {
        ++st.speculative_useful;
        complete = spec->completion;
      }
    }
    st.load_latency_sum += complete - issue;

    if (cfg_.prefetch.l1d != L1dPrefetcherKind::None)
      for (const auto& req : core.l1d_pf.on_access(r.pc, r.vaddr, r1.hit))
        issue_l1d_prefetch(core, req, pred, issue + cfg_.l1d.latency);

    if (core.ctrl && core.ctrl->variant().consume_at != Consume::Never)
      core.training.push_back({core.next + cfg_.core.window, detail::FlpTraining{pred.metadata, r.vaddr, served, pred.flp_tag}});
    return complete;
  }

  // Stores do not consult the predictors; they allocate on miss and retire
  // once the L1D has accepted them.
  std::uint64_t do_store(detail::CoreState& core, const TraceRecord& r, std::uint64_t issue)
  {
    auto& st = core.stats;
    ++st.stores;
    const std::uint64_t paddr = core.pages.translate(r.vaddr);
    ++st.l1d.accesses;
    Level served = Level::L1D;
    if (auto r1 = core.l1d.lookup(paddr); r1.hit) {
      ++st.l1d.hits;
      note_useful(*r1.block, st.l1d_pf);
      r1.block->dirty = true;
    } else {
      ++st.l1d.misses;
      const std::uint64_t t = issue + cfg_.l1d.latency;
      auto s = fetch_below_l1d(core, paddr, t, true, true, {});
      served = s.level;
      fill_l1d(core, paddr, true, {s.ready, false, s.level}, t);
    }
    ++st.demand_served[static_cast<std::size_t>(served)];
    return issue + cfg_.l1d.latency;
  }

  SimStats collect()
  {
    SimStats total;
    for (auto& core : cores_) {
      // flush pending training so predictor counters are complete
      core.next = core.trace.size() + cfg_.core.window;
      if (core.ctrl)
        drain_training(core);
      core.next = core.trace.size();

      auto& s = core.stats;
      s.cycles = core.last_retire;
      s.dram = dram_.counters(core.id);
      if (core.ctrl)
        s.offchip = core.ctrl->counters();
      check(s);
      accumulate(total, s);
      total.cycles = std::max(total.cycles, s.cycles);
    }
    if (cores_.size() > 1)
      for (auto& core : cores_)
        total.per_core.push_back(core.stats);
    return total;
  }

  static void check(const SimStats& s)
  {
    if (s.l1d.hits + s.l1d.misses != s.l1d.accesses || s.l2.hits + s.l2.misses != s.l2.accesses
        || s.llc.hits + s.llc.misses != s.llc.accesses)
      throw InvariantViolation("hit/miss counters do not add up");
    if (s.l1d.accesses != s.loads + s.stores)
      throw InvariantViolation("L1D accesses differ from memory operations");
    if (s.l1d_pf.emitted != s.l1d_pf.dropped + s.l1d_pf.issued || s.l1d_pf.issued != s.l1d_pf.redundant + s.l1d_pf.filled)
      throw InvariantViolation("prefetch counters do not add up");
    if (s.l1d_pf.useful + s.l1d_pf.useless > s.l1d_pf.filled)
      throw InvariantViolation("more prefetch outcomes than fills");
  }

  static void add(LevelCounters& a, const LevelCounters& b)
  {
    a.accesses += b.accesses;
    a.hits += b.hits;
    a.misses += b.misses;
  }

  static void add(PerLevel& a, const PerLevel& b)
  {
    for (std::size_t i = 0; i < a.size(); ++i)
      a[i] += b[i];
  }

  static void add(PrefetchCounters& a, const PrefetchCounters& b)
  {
    a.emitted += b.emitted;
    a.dropped += b.dropped;
    a.issued += b.issued;
    a.redundant += b.redundant;
    a.filled += b.filled;
    a.useful += b.useful;
    a.useless += b.useless;
    add(a.filled_from, b.filled_from);
    add(a.useful_from, b.useful_from);
    add(a.useless_from, b.useless_from);
  }

  static void accumulate(SimStats& t, const SimStats& s)
  {
    t.instructions += s.instructions;
    t.loads += s.loads;
    t.stores += s.stores;
    t.load_latency_sum += s.load_latency_sum;
    add(t.l1d, s.l1d);
    add(t.l2, s.l2);
    add(t.llc, s.llc);
    add(t.demand_served, s.demand_served);
    t.dram.demand_reads += s.dram.demand_reads;
    t.dram.prefetch_reads += s.dram.prefetch_reads;
    t.dram.speculative_reads += s.dram.speculative_reads;
    t.dram.merged_demand += s.dram.merged_demand;
    t.dram.merged_prefetch += s.dram.merged_prefetch;
    t.dram.merged_speculative += s.dram.merged_speculative;
    t.dram.writebacks += s.dram.writebacks;
    t.dram.queue_cycles += s.dram.queue_cycles;
    t.speculative_issued += s.speculative_issued;
    add(t.speculative_location, s.speculative_location);
    t.speculative_useful += s.speculative_useful;
    add(t.l1d_pf, s.l1d_pf);
    add(t.l2_pf, s.l2_pf);
    auto& o = t.offchip;
    const auto& p = s.offchip;
    o.predictions += p.predictions;
    o.high += p.high;
    o.delayed += p.delayed;
    o.onchip += p.onchip;
    o.core_issues += p.core_issues;
    o.l1d_miss_issues += p.l1d_miss_issues;
    o.flp_trainings += p.flp_trainings;
    o.flp_true_pos += p.flp_true_pos;
    o.flp_false_pos += p.flp_false_pos;
    o.flp_true_neg += p.flp_true_neg;
    o.flp_false_neg += p.flp_false_neg;
    o.slp_consulted += p.slp_consulted;
    o.slp_dropped += p.slp_dropped;
    o.slp_trainings += p.slp_trainings;
  }

  SimConfig cfg_;
  Cache llc_;
  Mshr llc_mshr_;
  Dram dram_;
  std::deque<detail::CoreState> cores_;
};

inline SimStats simulate(std::span<const TraceRecord> trace, const SimConfig& cfg, SimOptions opt = {})
{
  if (cfg.cores != 1)
    throw std::invalid_argument("simulate() is single-core; use simulate_multicore()");
  std::span<const TraceRecord> one[1] = {trace};
  return System(cfg, one, opt).run();
}

inline SimStats simulate_multicore(std::span<const std::vector<TraceRecord>> traces, const SimConfig& cfg, SimOptions opt = {})
{
  std::vector<std::span<const TraceRecord>> spans(traces.begin(), traces.end());
  SimConfig c = cfg;
  c.cores = static_cast<unsigned>(traces.size());
  return System(c, spans, opt).run();
}

} // namespace tlpsim
