#include "opsim/store.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>

namespace opsim {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[8] = {'O', 'P', 'S', 'I', 'M', 'S', 'T', '1'};
constexpr char kFooterMagic[8] = {'O', 'P', 'S', 'I', 'M', 'E', 'N', 'D'};

std::vector<std::uint8_t> deflate_bytes(const std::uint8_t* data, size_t len) {
    uLongf bound = compressBound(static_cast<uLong>(len));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(len), 6) != Z_OK)
        throw IoError("store: compression failure");
    out.resize(bound);
    return out;
}

std::vector<std::uint8_t> inflate_bytes(const std::uint8_t* data, size_t len, size_t raw_len) {
    std::vector<std::uint8_t> out(raw_len);
    uLongf got = static_cast<uLongf>(raw_len);
    if (uncompress(out.data(), &got, data, static_cast<uLong>(len)) != Z_OK || got != raw_len)
        throw IoError("store: corrupt compressed chunk");
    return out;
}

} // namespace

struct ResultsStore::Impl {
    StoreConfig config;
    std::string path;
    bool read_only = false;
    bool closed = false;
    bool frozen = false; // layout frozen after first write

    struct ExecutionEntry {
        TimePoint time{};
        int n_realized = 0;
        // File backend chunk location; raw data for the memory backend.
        std::uint64_t offset = 0;
        std::uint64_t enc_len = 0;
        std::uint64_t raw_len = 0;
        int codec = 0; // 0 raw, 1 deflate
        std::vector<double> mem_data;
    };
    struct Entry {
        ResultLayout layout;
        std::vector<ExecutionEntry> executions;
    };
    std::map<ResultKey, Entry> entries;

    // File backend state.
    std::FILE* file = nullptr;
    std::uint64_t file_end = 0;          // bytes actually on disk
    std::vector<std::uint8_t> pending;   // buffered, not yet written
    StoreStats stats;

    // LRU read cache.
    struct CacheSlot {
        std::string key;
        Matrix value;
    };
    mutable std::list<CacheSlot> lru;
    mutable std::unordered_map<std::string, std::list<CacheSlot>::iterator> lru_index;

    ~Impl() {
        if (file != nullptr) std::fclose(file);
    }

    const Entry& entry(const ResultKey& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw ContractError("store: unknown key " + key.str());
        return it->second;
    }

    const ExecutionEntry& execution(const ResultKey& key, TimePoint t) const {
        for (const auto& e : entry(key).executions)
            if (e.time == t) return e;
        throw ContractError("store: no execution " + format_iso8601(t) + " for key " + key.str());
    }

    void raw_write(const std::uint8_t* data, size_t len) {
        if (std::fwrite(data, 1, len, file) != len) throw IoError("store: write failure");
        ++stats.file_writes;
        stats.write_sizes.push_back(len);
        file_end += len;
    }

    void flush_pending_if_due() {
        if (pending.size() >= config.write_batch_min) {
            raw_write(pending.data(), pending.size());
            pending.clear();
        }
    }

    std::vector<std::uint8_t> read_span(std::uint64_t offset, std::uint64_t len) const {
        std::vector<std::uint8_t> out(static_cast<size_t>(len));
        if (offset >= file_end) {
            // Entirely in the pending buffer (read-through).
            const std::uint64_t rel = offset - file_end;
            std::memcpy(out.data(), pending.data() + rel, static_cast<size_t>(len));
            return out;
        }
        if (std::fseek(file, static_cast<long>(offset), SEEK_SET) != 0)
            throw IoError("store: seek failure");
        if (std::fread(out.data(), 1, static_cast<size_t>(len), file) != len)
            throw IoError("store: read failure");
        std::fseek(file, 0, SEEK_END);
        return out;
    }

    std::string cache_key(const ResultKey& key, TimePoint t) const {
        return key.str() + "@" + std::to_string(t.epoch_s);
    }

    void cache_put(const std::string& ck, Matrix m) const {
        if (config.read_cache_entries <= 0) return;
        auto it = lru_index.find(ck);
        if (it != lru_index.end()) {
            lru.erase(it->second);
            lru_index.erase(it);
        }
        lru.push_front({ck, std::move(m)});
        lru_index[ck] = lru.begin();
        while (lru.size() > static_cast<size_t>(config.read_cache_entries)) {
            lru_index.erase(lru.back().key);
            lru.pop_back();
        }
    }

    const Matrix* cache_get(const std::string& ck) const {
        auto it = lru_index.find(ck);
        if (it == lru_index.end()) return nullptr;
        lru.splice(lru.begin(), lru, it->second);
        return &it->second->value;
    }

    ordered_json directory_json() const {
        ordered_json dir;
        dir["format"] = "opsim-store";
        dir["version"] = 1;
        ordered_json keys = ordered_json::array();
        for (const auto& [key, e] : entries) {
            ordered_json jk;
            jk["model"] = key.model;
            jk["kind"] = key.kind;
            jk["name"] = key.name;
            jk["components"] = e.layout.components;
            jk["horizon"] = e.layout.horizon;
            ordered_json execs = ordered_json::array();
            for (const auto& x : e.executions) {
                ordered_json jx;
                jx["time"] = format_iso8601(x.time);
                jx["n_realized"] = x.n_realized;
                jx["offset"] = x.offset;
                jx["enc_len"] = x.enc_len;
                jx["raw_len"] = x.raw_len;
                jx["codec"] = x.codec;
                execs.push_back(std::move(jx));
            }
            jk["executions"] = std::move(execs);
            keys.push_back(std::move(jk));
        }
        dir["keys"] = std::move(keys);
        return dir;
    }
};

ResultsStore::ResultsStore() : impl_(std::make_unique<Impl>()) {}
ResultsStore::ResultsStore(ResultsStore&&) noexcept = default;
ResultsStore& ResultsStore::operator=(ResultsStore&&) noexcept = default;
ResultsStore::~ResultsStore() = default;

ResultsStore ResultsStore::create(const StoreConfig& config, const std::string& path) {
    ResultsStore store;
    store.impl_->config = config;
    if (store.impl_->config.write_batch_min < 4096)
        throw ContractError("store: write_batch_min must be at least 4 KiB");
    if (config.backend == StoreConfig::Backend::File) {
        if (path.empty()) throw ContractError("store: file backend needs a path");
        store.impl_->path = path;
        store.impl_->file = std::fopen(path.c_str(), "w+b");
        if (store.impl_->file == nullptr) throw IoError("store: cannot create '" + path + "'");
        // The header rides in the first batched write.
        store.impl_->pending.insert(store.impl_->pending.end(), kMagic, kMagic + 8);
    }
    return store;
}

ResultsStore ResultsStore::open_readonly(const std::string& path) {
    ResultsStore store;
    store.impl_->read_only = true;
    store.impl_->config.backend = StoreConfig::Backend::File;
    store.impl_->path = path;
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (f == nullptr) throw IoError("store: cannot open '" + path + "'");
    store.impl_->file = f;
    std::fseek(f, 0, SEEK_END);
    const long size = std::ftell(f);
    if (size < 32) throw ValidationError("store: '" + path + "' is not a results store");
    store.impl_->file_end = static_cast<std::uint64_t>(size);
    char head[8];
    std::fseek(f, 0, SEEK_SET);
    if (std::fread(head, 1, 8, f) != 8 || std::memcmp(head, kMagic, 8) != 0)
        throw ValidationError("store: '" + path + "' has no store header");
    char footer[24];
    std::fseek(f, size - 24, SEEK_SET);
    if (std::fread(footer, 1, 24, f) != 24 || std::memcmp(footer + 16, kFooterMagic, 8) != 0)
        throw ValidationError("store: '" + path + "' has no directory footer (not closed?)");
    std::uint64_t dir_offset, dir_len;
    std::memcpy(&dir_offset, footer, 8);
    std::memcpy(&dir_len, footer + 8, 8);
    std::fseek(f, static_cast<long>(dir_offset), SEEK_SET);
    std::string dir_text(dir_len, '\0');
    if (std::fread(dir_text.data(), 1, dir_len, f) != dir_len)
        throw IoError("store: cannot read directory");
    ordered_json dir = ordered_json::parse(dir_text);
    if (dir.value("format", "") != "opsim-store")
        throw ValidationError("store: '" + path + "' directory is not self-describing");
    for (const auto& jk : dir.at("keys")) {
        Impl::Entry e;
        e.layout.key = {jk.at("model").get<std::string>(), jk.at("kind").get<std::string>(),
                        jk.at("name").get<std::string>()};
        e.layout.components = jk.at("components").get<std::vector<std::string>>();
        e.layout.horizon = jk.at("horizon").get<int>();
        for (const auto& jx : jk.at("executions")) {
            Impl::ExecutionEntry x;
            x.time = parse_iso8601(jx.at("time").get<std::string>());
            x.n_realized = jx.at("n_realized").get<int>();
            x.offset = jx.at("offset").get<std::uint64_t>();
            x.enc_len = jx.at("enc_len").get<std::uint64_t>();
            x.raw_len = jx.at("raw_len").get<std::uint64_t>();
            x.codec = jx.at("codec").get<int>();
            e.executions.push_back(std::move(x));
        }
        store.impl_->entries.emplace(e.layout.key, std::move(e));
    }
    store.impl_->frozen = true;
    store.impl_->closed = true; // read-only stores take no writes
    return store;
}

void ResultsStore::register_layout(const std::vector<ResultLayout>& layouts) {
    for (const auto& layout : layouts) {
        auto it = impl_->entries.find(layout.key);
        if (it != impl_->entries.end()) {
            const auto& have = it->second.layout;
            if (have.components != layout.components || have.horizon != layout.horizon)
                throw ContractError("store: layout mismatch on re-register of " + layout.key.str());
            continue; // idempotent
        }
        if (impl_->frozen)
            throw ContractError("store: layout frozen, cannot register " + layout.key.str());
        Impl::Entry e;
        e.layout = layout;
        impl_->entries.emplace(layout.key, std::move(e));
    }
}

std::vector<ResultLayout> ResultsStore::layouts() const {
    std::vector<ResultLayout> out;
    for (const auto& [key, e] : impl_->entries) out.push_back(e.layout);
    return out;
}

void ResultsStore::write_result(const ResultKey& key, TimePoint execution, const Matrix& m,
                                int n_realized) {
    if (impl_->read_only || impl_->closed) throw ContractError("store: write after close");
    auto it = impl_->entries.find(key);
    if (it == impl_->entries.end()) throw ContractError("store: unknown key " + key.str());
    auto& e = it->second;
    if (m.rows != e.layout.horizon || m.cols != static_cast<int>(e.layout.components.size()))
        throw ContractError("store: shape mismatch for " + key.str() + ": got " +
                            std::to_string(m.rows) + "x" + std::to_string(m.cols) + ", layout is " +
                            std::to_string(e.layout.horizon) + "x" +
                            std::to_string(e.layout.components.size()));
    for (const auto& x : e.executions)
        if (x.time == execution)
            throw ContractError("store: duplicate execution " + format_iso8601(execution) + " for " +
                                key.str());
    impl_->frozen = true;

    Impl::ExecutionEntry x;
    x.time = execution;
    x.n_realized = n_realized;
    x.raw_len = m.data.size() * sizeof(double);

    if (impl_->config.backend == StoreConfig::Backend::Memory) {
        x.mem_data = m.data;
        e.executions.push_back(std::move(x));
        return;
    }

    const auto* raw = reinterpret_cast<const std::uint8_t*>(m.data.data());
    std::vector<std::uint8_t> encoded;
    if (impl_->config.compression) {
        encoded = deflate_bytes(raw, static_cast<size_t>(x.raw_len));
        if (encoded.size() < x.raw_len) {
            x.codec = 1;
        } else {
            encoded.assign(raw, raw + x.raw_len);
            x.codec = 0;
        }
    } else {
        encoded.assign(raw, raw + x.raw_len);
        x.codec = 0;
    }
    x.enc_len = encoded.size();
    x.offset = impl_->file_end + impl_->pending.size();
    impl_->pending.insert(impl_->pending.end(), encoded.begin(), encoded.end());
    e.executions.push_back(std::move(x));
    impl_->flush_pending_if_due();
}

Matrix ResultsStore::read_result(const ResultKey& key, TimePoint execution) const {
    const auto& e = impl_->entry(key);
    const auto& x = impl_->execution(key, execution);
    Matrix m(e.layout.horizon, static_cast<int>(e.layout.components.size()));
    if (impl_->config.backend == StoreConfig::Backend::Memory) {
        m.data = x.mem_data;
        return m;
    }
    const std::string ck = impl_->cache_key(key, execution);
    if (const Matrix* hit = impl_->cache_get(ck)) {
        ++impl_->stats.cache_hits;
        return *hit;
    }
    ++impl_->stats.cache_misses;
    const auto span = impl_->read_span(x.offset, x.enc_len);
    std::vector<std::uint8_t> raw;
    if (x.codec == 1)
        raw = inflate_bytes(span.data(), span.size(), static_cast<size_t>(x.raw_len));
    else
        raw = span;
    if (raw.size() != m.data.size() * sizeof(double))
        throw IoError("store: chunk size mismatch for " + key.str());
    std::memcpy(m.data.data(), raw.data(), raw.size());
    impl_->cache_put(ck, m);
    return m;
}

int ResultsStore::n_realized(const ResultKey& key, TimePoint execution) const {
    return impl_->execution(key, execution).n_realized;
}

std::vector<TimePoint> ResultsStore::executions(const ResultKey& key) const {
    std::vector<TimePoint> out;
    for (const auto& x : impl_->entry(key).executions) out.push_back(x.time);
    return out;
}

bool ResultsStore::has_key(const ResultKey& key) const {
    return impl_->entries.contains(key);
}

void ResultsStore::close() {
    if (impl_->closed) return; // idempotent
    impl_->closed = true;
    if (impl_->config.backend == StoreConfig::Backend::Memory || impl_->read_only) return;

    // Residual chunks, directory and footer leave in one final write.
    const std::uint64_t dir_offset = impl_->file_end + impl_->pending.size();
    const std::string dir_text = impl_->directory_json().dump();
    std::vector<std::uint8_t> tail = std::move(impl_->pending);
    impl_->pending.clear();
    tail.insert(tail.end(), dir_text.begin(), dir_text.end());
    const std::uint64_t dir_len = dir_text.size();
    std::uint8_t footer[24];
    std::memcpy(footer, &dir_offset, 8);
    std::memcpy(footer + 8, &dir_len, 8);
    std::memcpy(footer + 16, kFooterMagic, 8);
    tail.insert(tail.end(), footer, footer + 24);
    impl_->raw_write(tail.data(), tail.size());
    std::fflush(impl_->file);
}

const StoreStats& ResultsStore::stats() const { return impl_->stats; }

} // namespace opsim
