#include "nuwa/netsim/link.hpp"

#include <algorithm>

#include "nuwa/error.hpp"

namespace nuwa::netsim {

void LinkConfig::validate() const {
  if (trace.opportunities.empty() || trace.duration_ms <= 0) throw ConfigError("link needs a non-empty trace");
  if (queue_capacity < 1) throw ConfigError("queue capacity must be >= 1");
  if (one_way_prop_delay.count() < 0 || reverse_path_delay.count() < 0 || reverse_jitter.count() < 0) {
    throw ConfigError("delays must be >= 0");
  }
  if (!(random_loss_rate >= 0.0 && random_loss_rate < 1.0)) {
    throw ConfigError("random loss rate must be in [0, 1)");
  }
  if (mtu <= 0) throw ConfigError("mtu must be positive");
}

EnqueueResult BottleneckQueue::enqueue(const Packet& pkt, SimTime now) {
  if (occupancy() >= capacity_) return EnqueueResult::kDropped;
  queue_.push_back({pkt, now});
  return EnqueueResult::kAccepted;
}

std::optional<Departure> BottleneckQueue::deliver_opportunity(SimTime now) {
  if (queue_.empty()) return std::nullopt;
  Departure d{queue_.front().packet, now - queue_.front().enqueued_at};
  queue_.pop_front();
  return d;
}

std::int64_t BottleneckQueue::count_flow(core::FlowId flow) const {
  return std::count_if(queue_.begin(), queue_.end(),
                       [flow](const Queued& q) { return q.packet.flow_id == flow; });
}

std::optional<SimTime> OpportunityCursor::peek() const {
  if (index_ >= trace_->opportunities.size()) return std::nullopt;
  const auto ms = trace_->opportunities[index_] + cycle_ * trace_->duration_ms;
  return core::from_ms(ms);
}

void OpportunityCursor::advance() {
  if (++index_ >= trace_->opportunities.size() && loop_) {
    index_ = 0;
    ++cycle_;
  }
}

}  // namespace nuwa::netsim
