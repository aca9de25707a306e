#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <future>
#include <optional>
#include <vector>

namespace llmvs::detail {

template <typename R>
struct PrefixResult {
  std::vector<R> results;  // results for [begin, begin + results.size())
  std::exception_ptr error;
  std::size_t failed_at = 0;
};

/// Run fn(i) for i in [begin, end) with at most `limit` calls in flight,
/// collecting results in index order. Stops at the first failure and keeps
/// the contiguous successful prefix. `on_batch` sees the accumulated results
/// after every batch.
template <typename R, typename F>
PrefixResult<R> ordered_map(std::size_t begin, std::size_t end, int limit, F&& fn,
                            const std::function<void(const std::vector<R>&)>& on_batch = {}) {
  PrefixResult<R> out;
  const auto width = static_cast<std::size_t>(std::max(1, limit));
  for (std::size_t b = begin; b < end; b += width) {
    const std::size_t e = std::min(end, b + width);
    std::vector<std::optional<R>> batch(e - b);
    std::vector<std::exception_ptr> errors(e - b);
    if (width == 1) {
      try {
        batch[0] = fn(b);
      } catch (...) {
        errors[0] = std::current_exception();
      }
    } else {
      std::vector<std::future<R>> futures;
      futures.reserve(e - b);
      for (std::size_t i = b; i < e; ++i)
        futures.push_back(std::async(std::launch::async, [&fn, i] { return fn(i); }));
      for (std::size_t i = 0; i < futures.size(); ++i) {
        try {
          batch[i] = futures[i].get();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (errors[i]) {
        out.error = errors[i];
        out.failed_at = b + i;
        if (on_batch) on_batch(out.results);
        return out;
      }
      out.results.push_back(std::move(*batch[i]));
    }
    if (on_batch) on_batch(out.results);
  }
  return out;
}

}  // namespace llmvs::detail
