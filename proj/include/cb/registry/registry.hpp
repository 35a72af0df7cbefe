#pragma once

// Persistent, versioned, content-addressed store of components, contexts and
// runs.
//
// Layout: `<root>/blobs/<sha256>` holds payload archives; `<root>/meta.db` is
// an SQLite database with the index. Mutations are serialized through one
// writer at a time; readers run concurrently against consistent snapshots.
//
// Permanence: publishing a run makes every component version it references
// public and permanent. Permanent components and public runs can never be
// deleted, and a version's bytes never change once stored.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "cb/core/context.hpp"
#include "cb/core/error.hpp"
#include "cb/core/types.hpp"
#include "cb/registry/registrar.hpp"

namespace cb {

namespace sql {
class Db;
}

struct ComponentMetadata {
    std::string title;
    std::string description;
    std::string license;
    UtcTime created_at;
    std::string owner;

    bool operator==(const ComponentMetadata&) const = default;
};

struct ComponentRecord {
    Descriptor descriptor;
    std::string payload_hash;
    ComponentMetadata metadata;
    Visibility visibility = Visibility::Private;
    bool permanent = false;

    const ComponentId& id() const { return id_of(descriptor); }
    ComponentKind kind() const { return kind_of(descriptor); }

    bool operator==(const ComponentRecord&) const = default;
};

enum class SubjectKind { Component, Run };

struct Subject {
    SubjectKind kind = SubjectKind::Component;
    std::string ref;  // name@version or run id

    static Subject component(const ComponentId& id) { return {SubjectKind::Component, id.str()}; }
    static Subject run(const std::string& run_id) { return {SubjectKind::Run, run_id}; }
};

struct PublicationRecord {
    Subject subject;
    std::string identifier;
    std::string registrar;
    UtcTime minted_at;
};

struct StoredRun {
    BenchmarkRun run;
    std::string owner;
};

enum class Scope { All, Mine, Public };  // All = public plus own

struct ComponentQuery {
    std::optional<ComponentKind> kind;
    std::optional<TaskKind> task;
    std::string text;  // case-insensitive substring of name, title or description
    Scope scope = Scope::All;
    int page = 1;       // 1-based
    int page_size = 20; // 1..100
};

struct RunQuery {
    std::optional<std::string> context_id;
    std::optional<std::string> executed_by;
    Scope scope = Scope::All;
    int page = 1;
    int page_size = 20;
};

template <typename T>
struct Page {
    std::vector<T> items;
    std::int64_t total = 0;
    int page = 1;
    int page_size = 20;
};

/// Thrown by store_run/publish when validate_run reports violations.
class InvalidRunError : public Error {
public:
    InvalidRunError(ValidationReport report, const std::string& detail)
        : Error(ErrorCode::InvalidRun, detail), report_(std::move(report)) {}
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

struct PrincipalRecord {
    std::string user_name;
    std::string api_key_hash;
    bool active = true;
};

struct AuditProblem {
    ComponentId id;
    std::string detail;
};

class Registry {
public:
    Registry(std::filesystem::path root, std::shared_ptr<Registrar> registrar);
    ~Registry();
    Registry(const Registry&) = delete;
    Registry& operator=(const Registry&) = delete;

    const std::filesystem::path& root() const { return root_; }

    // Components. `principal` is a user name; empty means anonymous.
    ComponentId register_component(ComponentKind kind, Descriptor descriptor, std::string_view payload,
                                   const std::string& principal, ComponentMetadata metadata = {});
    ComponentId new_version(const ComponentId& base, Descriptor descriptor, std::string_view payload,
                            const std::string& principal, ComponentMetadata metadata = {});

    /// Reads kind, descriptor and metadata from the archive's manifest.
    ComponentId register_archive(std::string_view payload, const std::string& principal);
    ComponentId new_version_archive(const std::string& name, std::string_view payload, const std::string& principal);

    std::pair<ComponentRecord, std::string> fetch(const ComponentId& id, const std::string& principal) const;
    ComponentRecord describe(const ComponentId& id, const std::string& principal) const;
    Page<ComponentRecord> query(const ComponentQuery& q, const std::string& principal) const;

    /// Latest version number for a name, if any.
    std::optional<std::int64_t> latest_version(const std::string& name) const;

    // Contexts
    void store_context(const BenchmarkContext& context, const std::string& principal);
    BenchmarkContext get_context(const std::string& context_id) const;

    // Runs
    void store_run(BenchmarkRun run, const std::string& principal);
    BenchmarkRun get_run(const std::string& run_id, const std::string& principal) const;
    Page<BenchmarkRun> list_runs(const RunQuery& q, const std::string& principal) const;
    /// Every run visible to the principal (public plus own), in run_id order.
    std::vector<BenchmarkRun> accessible_runs(const std::string& principal) const;

    // Publication and deletion
    PublicationRecord publish(const Subject& subject, const std::string& principal);
    std::optional<PublicationRecord> publication(const Subject& subject) const;
    void remove(const Subject& subject, const std::string& principal);

    /// Re-hashes every stored payload against its index entry.
    std::vector<AuditProblem> audit() const;

    // Principals (API keys are stored only as hashes)
    void add_principal(const PrincipalRecord& p);
    void set_principal_active(const std::string& user_name, bool active);
    std::vector<PrincipalRecord> principals() const;

    /// Test hook invoked after a publication record is stored and before the
    /// subject's visibility flips; throwing from it simulates a crash.
    std::function<void()> after_publication_recorded;

private:
    std::filesystem::path blob_path(const std::string& hash) const;
    void write_blob(const std::string& hash, std::string_view payload);
    std::string read_blob(const std::string& hash) const;

    ComponentId insert_component(ComponentKind kind, Descriptor descriptor, std::string_view payload,
                                 const std::string& principal, ComponentMetadata metadata, std::int64_t version);
    std::optional<ComponentRecord> load_component(const ComponentId& id) const;
    std::optional<StoredRun> load_run(const std::string& run_id) const;
    std::optional<BenchmarkContext> load_context(const std::string& context_id) const;
    bool can_view(const ComponentRecord& r, const std::string& principal) const;

    std::filesystem::path root_;
    std::shared_ptr<Registrar> registrar_;
    std::unique_ptr<sql::Db> db_;
    mutable std::shared_mutex mutex_;
};

}  // namespace cb
