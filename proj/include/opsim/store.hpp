#pragma once

#include "opsim/error.hpp"
#include "opsim/time.hpp"

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace opsim {

// Results persistence: an in-memory backend and a file-backed hierarchical
// chunked container (header + compressed chunks + key directory footer).
// Writes are buffered so every file-system write except the final one is at
// least write_batch_min bytes; reads see unflushed data and are served
// through an LRU cache.

struct ResultKey {
    std::string model;
    std::string kind; // "variable" | "parameter" | "dual" | "auxiliary"
    std::string name; // e.g. "ActivePower"

    friend auto operator<=>(const ResultKey&, const ResultKey&) = default;
    std::string str() const { return model + "/" + kind + "/" + name; }
};

struct ResultLayout {
    ResultKey key;
    std::vector<std::string> components;
    int horizon = 0;
};

struct Matrix {
    int rows = 0; // horizon steps
    int cols = 0; // components
    std::vector<double> data; // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct StoreConfig {
    enum class Backend { Memory, File };
    Backend backend = Backend::Memory;
    std::uint64_t write_batch_min = 1 << 20; // bytes; >= 4 KiB enforced
    int read_cache_entries = 64;
    bool compression = true;
};

struct StoreStats {
    std::uint64_t file_writes = 0;
    std::vector<std::uint64_t> write_sizes;
    std::uint64_t cache_hits = 0;
    std::uint64_t cache_misses = 0;
};

class ResultsStore {
public:
    // Write mode. `path` is the store file for the file backend (created or
    // truncated); ignored for the memory backend.
    static ResultsStore create(const StoreConfig& config, const std::string& path = "");
    // Read-only mode on an existing self-describing store file.
    static ResultsStore open_readonly(const std::string& path);

    ResultsStore(ResultsStore&&) noexcept;
    ResultsStore& operator=(ResultsStore&&) noexcept;
    ~ResultsStore();

    // Preallocates the hierarchy; idempotent for identical layouts, an error
    // once any write happened.
    void register_layout(const std::vector<ResultLayout>& layouts);
    std::vector<ResultLayout> layouts() const;

    void write_result(const ResultKey& key, TimePoint execution, const Matrix& m, int n_realized);
    Matrix read_result(const ResultKey& key, TimePoint execution) const;
    int n_realized(const ResultKey& key, TimePoint execution) const;
    std::vector<TimePoint> executions(const ResultKey& key) const;
    bool has_key(const ResultKey& key) const;

    // Flushes residual buffers (the final write may be smaller than the
    // batch minimum) and the self-describing directory. Idempotent. Memory
    // backend contents are lost when the process exits without close.
    void close();

    const StoreStats& stats() const;

    ResultsStore(const ResultsStore&) = delete;
    ResultsStore& operator=(const ResultsStore&) = delete;

private:
    ResultsStore();
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace opsim
