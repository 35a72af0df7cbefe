#include "cb/registry/registry.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "cb/core/canonical.hpp"
#include "cb/core/hash.hpp"
#include "cb/core/validate.hpp"
#include "cb/registry/archive.hpp"
#include "sqlite.hpp"

namespace cb {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS names (
  name TEXT PRIMARY KEY,
  owner TEXT NOT NULL,
  last_version INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS components (
  name TEXT NOT NULL,
  version INTEGER NOT NULL,
  kind TEXT NOT NULL,
  task TEXT,
  descriptor TEXT NOT NULL,
  payload_hash TEXT NOT NULL,
  title TEXT NOT NULL,
  description TEXT NOT NULL,
  license TEXT NOT NULL,
  created_at TEXT NOT NULL,
  owner TEXT NOT NULL,
  visibility TEXT NOT NULL,
  permanent INTEGER NOT NULL,
  PRIMARY KEY (name, version)
);
CREATE TABLE IF NOT EXISTS contexts (
  context_id TEXT PRIMARY KEY,
  owner TEXT NOT NULL,
  body TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
  run_id TEXT PRIMARY KEY,
  context_id TEXT NOT NULL,
  owner TEXT NOT NULL,
  visibility TEXT NOT NULL,
  body TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS publications (
  subject_kind TEXT NOT NULL,
  subject TEXT NOT NULL,
  identifier TEXT NOT NULL UNIQUE,
  registrar TEXT NOT NULL,
  minted_at TEXT NOT NULL,
  PRIMARY KEY (subject_kind, subject)
);
CREATE TABLE IF NOT EXISTS principals (
  user_name TEXT PRIMARY KEY,
  api_key_hash TEXT NOT NULL UNIQUE,
  active INTEGER NOT NULL
);
)sql";

constexpr std::string_view kComponentColumns =
    "descriptor, kind, payload_hash, title, description, license, created_at, owner, visibility, permanent";

std::string_view subject_kind_name(SubjectKind k) { return k == SubjectKind::Run ? "run" : "component"; }

std::optional<std::string> task_of(const Descriptor& d) {
    if (auto m = std::get_if<ModelDescriptor>(&d)) return std::string(to_string(m->signature.task));
    if (auto m = std::get_if<MetricDescriptor>(&d)) return std::string(to_string(m->signature.task));
    return std::nullopt;
}

Json descriptor_body(const Descriptor& d) {
    Json body;
    std::visit([&](const auto& x) { body = x; }, d);
    return body;
}

ComponentRecord record_from_row(const sql::Stmt& s) {
    ComponentRecord r;
    Json envelope{{"kind", s.text(1)}, {"descriptor", parse_json(s.text(0))}};
    r.descriptor = descriptor_from_json(envelope);
    r.payload_hash = s.text(2);
    r.metadata.title = s.text(3);
    r.metadata.description = s.text(4);
    r.metadata.license = s.text(5);
    r.metadata.created_at = parse_utc(s.text(6));
    r.metadata.owner = s.text(7);
    r.visibility = parse_visibility(s.text(8));
    r.permanent = s.integer(9) != 0;
    return r;
}

ComponentMetadata metadata_from_json(const Json& j) {
    ComponentMetadata m;
    auto str = [&](const char* key) {
        auto it = j.find(key);
        return it != j.end() && it->is_string() ? it->get<std::string>() : std::string{};
    };
    m.title = str("title");
    m.description = str("description");
    m.license = str("license");
    return m;
}

std::pair<int, int> page_window(int page, int page_size) {
    if (page_size < 1 || page_size > 100) throw Error(ErrorCode::SchemaViolation, "page_size must be within 1..100");
    if (page < 1) throw Error(ErrorCode::SchemaViolation, "page must be >= 1");
    return {page_size, (page - 1) * page_size};
}

std::set<ComponentId> referenced_components(const BenchmarkContext& c) {
    std::set<ComponentId> out = c.datasets;
    out.insert(c.models.begin(), c.models.end());
    out.insert(c.metrics.begin(), c.metrics.end());
    return out;
}

}  // namespace

Registry::Registry(fs::path root, std::shared_ptr<Registrar> registrar)
    : root_(std::move(root)), registrar_(std::move(registrar)) {
    if (!registrar_) registrar_ = std::make_shared<LocalSimRegistrar>();
    fs::create_directories(root_ / "blobs");
    db_ = std::make_unique<sql::Db>((root_ / "meta.db").string());
    db_->exec("PRAGMA journal_mode=WAL");
    db_->exec("PRAGMA foreign_keys=ON");
    db_->exec(kSchema);
}

Registry::~Registry() = default;

fs::path Registry::blob_path(const std::string& hash) const { return root_ / "blobs" / hash; }

void Registry::write_blob(const std::string& hash, std::string_view payload) {
    fs::path target = blob_path(hash);
    if (fs::exists(target)) return;
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error(ErrorCode::Io, "cannot write blob " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string Registry::read_blob(const std::string& hash) const {
    std::ifstream in(blob_path(hash), std::ios::binary);
    if (!in) throw Error(ErrorCode::IntegrityFailure, "payload blob " + hash + " is missing from the store");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool Registry::can_view(const ComponentRecord& r, const std::string& principal) const {
    return r.visibility == Visibility::Public || (!principal.empty() && r.metadata.owner == principal);
}

ComponentId Registry::insert_component(ComponentKind kind, Descriptor descriptor, std::string_view payload,
                                       const std::string& principal, ComponentMetadata metadata,
                                       std::int64_t version) {
    if (kind_of(descriptor) != kind) {
        throw Error(ErrorCode::SchemaViolation, "descriptor kind does not match " + std::string(to_string(kind)));
    }
    id_of(descriptor).version = version;
    validate(descriptor);

    auto entries = archive::unpack(payload);
    auto manifest = archive::read_manifest(entries);
    if (kind_of(manifest.descriptor) != kind) throw Error(ErrorCode::CorruptArchive, "manifest kind does not match");
    id_of(manifest.descriptor) = id_of(descriptor);
    if (manifest.descriptor != descriptor) {
        throw Error(ErrorCode::CorruptArchive, "manifest descriptor differs from the submitted descriptor");
    }
    archive::check_payload(descriptor, entries);

    const std::string hash = sha256_hex(payload);
    write_blob(hash, payload);

    metadata.owner = principal;
    metadata.created_at = utc_now();
    const ComponentId id = id_of(descriptor);
    db_->prepare("INSERT INTO components (name, version, kind, task, descriptor, payload_hash, title, description, "
                 "license, created_at, owner, visibility, permanent) VALUES (?,?,?,?,?,?,?,?,?,?,?,'private',0)")
        .bind(1, id.name)
        .bind(2, id.version)
        .bind(3, to_string(kind))
        .bind(4, task_of(descriptor))
        .bind(5, canonical_dump(descriptor_body(descriptor)))
        .bind(6, hash)
        .bind(7, metadata.title)
        .bind(8, metadata.description)
        .bind(9, metadata.license)
        .bind(10, format_utc(metadata.created_at))
        .bind(11, metadata.owner)
        .run();
    return id;
}

ComponentId Registry::register_component(ComponentKind kind, Descriptor descriptor, std::string_view payload,
                                         const std::string& principal, ComponentMetadata metadata) {
    if (principal.empty()) throw Error(ErrorCode::Unauthenticated, "registration requires a principal");
    const std::string name = id_of(descriptor).name;
    std::unique_lock lock(mutex_);
    sql::Transaction tx(*db_);
    auto existing = db_->prepare("SELECT owner FROM names WHERE name = ?");
    existing.bind(1, name);
    if (existing.step()) throw Error(ErrorCode::NameTaken, "component name '" + name + "' already exists; use new_version");
    auto id = insert_component(kind, std::move(descriptor), payload, principal, std::move(metadata), 1);
    db_->prepare("INSERT INTO names (name, owner, last_version) VALUES (?,?,1)").bind(1, name).bind(2, principal).run();
    tx.commit();
    return id;
}

ComponentId Registry::new_version(const ComponentId& base, Descriptor descriptor, std::string_view payload,
                                  const std::string& principal, ComponentMetadata metadata) {
    std::unique_lock lock(mutex_);
    sql::Transaction tx(*db_);
    auto q = db_->prepare("SELECT owner, last_version FROM names WHERE name = ?");
    q.bind(1, base.name);
    if (!q.step()) throw Error(ErrorCode::UnknownComponent, "no component named '" + base.name + "'");
    if (q.text(0) != principal) throw Error(ErrorCode::NotOwner, base.name + " is owned by another principal");
    const std::int64_t next = q.integer(1) + 1;
    id_of(descriptor).name = base.name;
    auto kind = kind_of(descriptor);
    auto id = insert_component(kind, std::move(descriptor), payload, principal, std::move(metadata), next);
    db_->prepare("UPDATE names SET last_version = ? WHERE name = ?").bind(1, next).bind(2, base.name).run();
    tx.commit();
    return id;
}

ComponentId Registry::register_archive(std::string_view payload, const std::string& principal) {
    auto manifest = archive::read_manifest(archive::unpack(payload));
    auto kind = kind_of(manifest.descriptor);
    return register_component(kind, manifest.descriptor, payload, principal, metadata_from_json(manifest.metadata));
}

ComponentId Registry::new_version_archive(const std::string& name, std::string_view payload,
                                          const std::string& principal) {
    auto manifest = archive::read_manifest(archive::unpack(payload));
    return new_version(ComponentId{name, 1}, manifest.descriptor, payload, principal,
                       metadata_from_json(manifest.metadata));
}

std::optional<ComponentRecord> Registry::load_component(const ComponentId& id) const {
    auto s = db_->prepare("SELECT " + std::string(kComponentColumns) + " FROM components WHERE name = ? AND version = ?");
    s.bind(1, id.name).bind(2, id.version);
    if (!s.step()) return std::nullopt;
    return record_from_row(s);
}

ComponentRecord Registry::describe(const ComponentId& id, const std::string& principal) const {
    std::shared_lock lock(mutex_);
    auto r = load_component(id);
    if (!r) throw Error(ErrorCode::UnknownComponent, "unknown component " + id.str());
    if (!can_view(*r, principal)) throw Error(ErrorCode::Forbidden, id.str() + " is private");
    return *r;
}

std::pair<ComponentRecord, std::string> Registry::fetch(const ComponentId& id, const std::string& principal) const {
    std::shared_lock lock(mutex_);
    auto r = load_component(id);
    if (!r) throw Error(ErrorCode::UnknownComponent, "unknown component " + id.str());
    if (!can_view(*r, principal)) throw Error(ErrorCode::Forbidden, id.str() + " is private");
    std::string bytes = read_blob(r->payload_hash);
    if (sha256_hex(bytes) != r->payload_hash) {
        throw Error(ErrorCode::IntegrityFailure, "stored payload of " + id.str() + " no longer matches its hash");
    }
    return {std::move(*r), std::move(bytes)};
}

std::optional<std::int64_t> Registry::latest_version(const std::string& name) const {
    std::shared_lock lock(mutex_);
    auto s = db_->prepare("SELECT MAX(version) FROM components WHERE name = ?");
    s.bind(1, name);
    if (!s.step() || !s.opt_text(0)) return std::nullopt;
    return s.integer(0);
}

Page<ComponentRecord> Registry::query(const ComponentQuery& q, const std::string& principal) const {
    auto [limit, offset] = page_window(q.page, q.page_size);
    std::string where = " WHERE 1=1";
    switch (q.scope) {
        case Scope::All: where += " AND (visibility = 'public' OR owner = ?1)"; break;
        case Scope::Mine: where += " AND owner = ?1 AND ?1 <> ''"; break;
        case Scope::Public: where += " AND visibility = 'public' AND ?1 = ?1"; break;
    }
    if (q.kind) where += " AND kind = ?2";
    if (q.task) where += " AND task = ?3";
    if (!q.text.empty()) {
        where += " AND (instr(lower(name), lower(?4)) > 0 OR instr(lower(title), lower(?4)) > 0"
                 " OR instr(lower(description), lower(?4)) > 0)";
    }
    auto bind_all = [&](sql::Stmt& s) {
        s.bind(1, principal);
        if (q.kind) s.bind(2, to_string(*q.kind));
        if (q.task) s.bind(3, to_string(*q.task));
        if (!q.text.empty()) s.bind(4, q.text);
    };

    std::shared_lock lock(mutex_);
    Page<ComponentRecord> page;
    page.page = q.page;
    page.page_size = q.page_size;
    auto count = db_->prepare("SELECT COUNT(*) FROM components" + where);
    bind_all(count);
    count.step();
    page.total = count.integer(0);
    auto s = db_->prepare("SELECT " + std::string(kComponentColumns) + " FROM components" + where +
                          " ORDER BY name ASC, version DESC LIMIT ?5 OFFSET ?6");
    bind_all(s);
    s.bind(5, limit).bind(6, offset);
    while (s.step()) page.items.push_back(record_from_row(s));
    return page;
}

std::optional<BenchmarkContext> Registry::load_context(const std::string& context_id) const {
    auto s = db_->prepare("SELECT body FROM contexts WHERE context_id = ?");
    s.bind(1, context_id);
    if (!s.step()) return std::nullopt;
    return decode<BenchmarkContext>(s.text(0));
}

void Registry::store_context(const BenchmarkContext& context, const std::string& principal) {
    if (principal.empty()) throw Error(ErrorCode::Unauthenticated, "storing a context requires a principal");
    expand_context(context);  // EmptyFamily / SchemaViolation

    std::unique_lock lock(mutex_);
    auto check_group = [&](const std::set<ComponentId>& ids, ComponentKind kind) {
        for (const auto& id : ids) {
            auto r = load_component(id);
            if (!r) throw Error(ErrorCode::UnknownComponent, "context references unknown component " + id.str());
            if (!can_view(*r, principal)) throw Error(ErrorCode::Forbidden, id.str() + " is private");
            if (r->kind() != kind) {
                throw Error(ErrorCode::SchemaViolation,
                            id.str() + " is a " + std::string(to_string(r->kind())) + ", not a " + std::string(to_string(kind)));
            }
            if (kind == ComponentKind::Model) {
                const auto& schema = std::get<ModelDescriptor>(r->descriptor).hyperparameter_schema;
                auto fam = context.hyper_family.find(id);
                if (fam == context.hyper_family.end()) continue;
                for (const auto& h : fam->second) {
                    for (const auto& [key, value] : h.values) {
                        auto spec = schema.find(key);
                        if (spec == schema.end()) {
                            if (key == "seed" && std::holds_alternative<std::int64_t>(value)) continue;
                            throw Error(ErrorCode::SchemaViolation, id.str() + " has no hyperparameter '" + key + "'");
                        }
                        if (!param_accepts(spec->second, value)) {
                            throw Error(ErrorCode::SchemaViolation, "value of '" + key + "' is outside the range of " + id.str());
                        }
                    }
                }
            }
        }
    };
    check_group(context.datasets, ComponentKind::Dataset);
    check_group(context.models, ComponentKind::Model);
    check_group(context.metrics, ComponentKind::Metric);

    const std::string body = encode(context);
    sql::Transaction tx(*db_);
    auto existing = db_->prepare("SELECT body FROM contexts WHERE context_id = ?");
    existing.bind(1, context.context_id);
    if (existing.step()) {
        if (existing.text(0) == body) return;
        throw Error(ErrorCode::Conflict, "context '" + context.context_id + "' already exists with different content");
    }
    db_->prepare("INSERT INTO contexts (context_id, owner, body) VALUES (?,?,?)")
        .bind(1, context.context_id)
        .bind(2, principal)
        .bind(3, body)
        .run();
    tx.commit();
}

BenchmarkContext Registry::get_context(const std::string& context_id) const {
    std::shared_lock lock(mutex_);
    auto c = load_context(context_id);
    if (!c) throw Error(ErrorCode::UnknownContext, "unknown context '" + context_id + "'");
    return *c;
}

std::optional<StoredRun> Registry::load_run(const std::string& run_id) const {
    auto s = db_->prepare("SELECT body, owner FROM runs WHERE run_id = ?");
    s.bind(1, run_id);
    if (!s.step()) return std::nullopt;
    return StoredRun{decode<BenchmarkRun>(s.text(0)), s.text(1)};
}

void Registry::store_run(BenchmarkRun run, const std::string& principal) {
    if (principal.empty()) throw Error(ErrorCode::Unauthenticated, "uploading a run requires a principal");
    if (run.run_id.empty()) throw Error(ErrorCode::SchemaViolation, "run_id must be non-empty");
    run.executed_by = principal;
    if (run.visibility != Visibility::Private || run.minted_identifier) {
        throw InvalidRunError({Violation{"identifier-visibility", "", "runs are uploaded private; publish separately"}},
                              "runs must be uploaded as private");
    }

    std::unique_lock lock(mutex_);
    auto context = load_context(run.context_id);
    if (!context) throw Error(ErrorCode::UnknownContext, "unknown context '" + run.context_id + "'");
    auto report = validate_run(run, *context);
    if (!report.empty()) {
        throw InvalidRunError(report, "run fails validation with " + std::to_string(report.size()) + " violation(s)");
    }
    for (const auto& id : referenced_components(*context)) {
        auto r = load_component(id);
        if (!r) throw Error(ErrorCode::UnknownComponent, "run references unknown component " + id.str());
        if (!can_view(*r, principal)) throw Error(ErrorCode::Forbidden, id.str() + " is private");
    }

    const std::string body = encode(run);
    sql::Transaction tx(*db_);
    auto existing = db_->prepare("SELECT body FROM runs WHERE run_id = ?");
    existing.bind(1, run.run_id);
    if (existing.step()) {
        if (existing.text(0) == body) return;
        throw Error(ErrorCode::Conflict, "run '" + run.run_id + "' already exists with different content");
    }
    db_->prepare("INSERT INTO runs (run_id, context_id, owner, visibility, body) VALUES (?,?,?,'private',?)")
        .bind(1, run.run_id)
        .bind(2, run.context_id)
        .bind(3, principal)
        .bind(4, body)
        .run();
    tx.commit();
}

BenchmarkRun Registry::get_run(const std::string& run_id, const std::string& principal) const {
    std::shared_lock lock(mutex_);
    auto r = load_run(run_id);
    if (!r) throw Error(ErrorCode::UnknownRun, "unknown run '" + run_id + "'");
    if (r->run.visibility != Visibility::Public && (principal.empty() || r->owner != principal)) {
        throw Error(ErrorCode::Forbidden, "run '" + run_id + "' is private");
    }
    return r->run;
}

Page<BenchmarkRun> Registry::list_runs(const RunQuery& q, const std::string& principal) const {
    auto [limit, offset] = page_window(q.page, q.page_size);
    std::string where = " WHERE 1=1";
    switch (q.scope) {
        case Scope::All: where += " AND (visibility = 'public' OR owner = ?1)"; break;
        case Scope::Mine: where += " AND owner = ?1 AND ?1 <> ''"; break;
        case Scope::Public: where += " AND visibility = 'public' AND ?1 = ?1"; break;
    }
    if (q.context_id) where += " AND context_id = ?2";
    if (q.executed_by) where += " AND owner = ?3";
    auto bind_all = [&](sql::Stmt& s) {
        s.bind(1, principal);
        if (q.context_id) s.bind(2, *q.context_id);
        if (q.executed_by) s.bind(3, *q.executed_by);
    };
    std::shared_lock lock(mutex_);
    Page<BenchmarkRun> page;
    page.page = q.page;
    page.page_size = q.page_size;
    auto count = db_->prepare("SELECT COUNT(*) FROM runs" + where);
    bind_all(count);
    count.step();
    page.total = count.integer(0);
    auto s = db_->prepare("SELECT body FROM runs" + where + " ORDER BY run_id DESC LIMIT ?4 OFFSET ?5");
    bind_all(s);
    s.bind(4, limit).bind(5, offset);
    while (s.step()) page.items.push_back(decode<BenchmarkRun>(s.text(0)));
    return page;
}

std::vector<BenchmarkRun> Registry::accessible_runs(const std::string& principal) const {
    std::shared_lock lock(mutex_);
    auto s = db_->prepare("SELECT body FROM runs WHERE visibility = 'public' OR owner = ? ORDER BY run_id ASC");
    s.bind(1, principal);
    std::vector<BenchmarkRun> out;
    while (s.step()) out.push_back(decode<BenchmarkRun>(s.text(0)));
    return out;
}

std::optional<PublicationRecord> Registry::publication(const Subject& subject) const {
    auto s = db_->prepare("SELECT identifier, registrar, minted_at FROM publications WHERE subject_kind = ? AND subject = ?");
    s.bind(1, subject_kind_name(subject.kind)).bind(2, subject.ref);
    if (!s.step()) return std::nullopt;
    return PublicationRecord{subject, s.text(0), s.text(1), parse_utc(s.text(2))};
}

PublicationRecord Registry::publish(const Subject& subject, const std::string& principal) {
    DepositionRequest request;
    request.subject = std::string(subject_kind_name(subject.kind)) + ":" + subject.ref;
    request.creators = {principal};
    std::set<ComponentId> components;

    {
        std::shared_lock lock(mutex_);
        if (subject.kind == SubjectKind::Component) {
            auto id = ComponentId::parse(subject.ref);
            auto r = load_component(id);
            if (!r) throw Error(ErrorCode::UnknownComponent, "unknown component " + subject.ref);
            if (r->metadata.owner != principal) throw Error(ErrorCode::NotOwner, subject.ref + " is owned by another principal");
            request.title = r->metadata.title.empty() ? subject.ref : r->metadata.title;
            request.description = r->metadata.description;
        } else {
            auto stored = load_run(subject.ref);
            if (!stored) throw Error(ErrorCode::UnknownRun, "unknown run '" + subject.ref + "'");
            if (stored->owner != principal) throw Error(ErrorCode::NotOwner, "run '" + subject.ref + "' is owned by another principal");
            auto context = load_context(stored->run.context_id);
            if (!context) throw Error(ErrorCode::UnknownContext, "unknown context '" + stored->run.context_id + "'");
            BenchmarkRun as_private = stored->run;
            as_private.visibility = Visibility::Private;
            as_private.minted_identifier.reset();
            auto report = validate_run(as_private, *context);
            if (!report.empty()) throw InvalidRunError(report, "run fails validation");
            components = referenced_components(*context);
            for (const auto& id : components) {
                auto r = load_component(id);
                if (!r) throw Error(ErrorCode::UnknownComponent, "run references unknown component " + id.str());
                if (r->visibility != Visibility::Public && r->metadata.owner != principal) {
                    throw Error(ErrorCode::Forbidden, id.str() + " is private to another principal");
                }
            }
            request.title = "Benchmark run " + subject.ref;
            request.description = "Benchmark run of context " + context->context_id;
        }
    }

    auto existing = [&] {
        std::shared_lock lock(mutex_);
        return publication(subject);
    }();

    // Mint first, flip second; a failure between the two leaves an orphan
    // record that the next publish call completes.
    if (!existing) {
        std::string identifier = registrar_->mint(request);
        std::unique_lock lock(mutex_);
        sql::Transaction tx(*db_);
        existing = publication(subject);
        if (!existing) {
            PublicationRecord rec{subject, identifier, registrar_->name(), utc_now()};
            db_->prepare("INSERT INTO publications (subject_kind, subject, identifier, registrar, minted_at) VALUES (?,?,?,?,?)")
                .bind(1, subject_kind_name(subject.kind))
                .bind(2, subject.ref)
                .bind(3, rec.identifier)
                .bind(4, rec.registrar)
                .bind(5, format_utc(rec.minted_at))
                .run();
            tx.commit();
            existing = rec;
        }
    }
    if (after_publication_recorded) after_publication_recorded();

    std::unique_lock lock(mutex_);
    sql::Transaction tx(*db_);
    if (subject.kind == SubjectKind::Component) {
        auto id = ComponentId::parse(subject.ref);
        db_->prepare("UPDATE components SET visibility = 'public' WHERE name = ? AND version = ?")
            .bind(1, id.name)
            .bind(2, id.version)
            .run();
    } else {
        auto stored = load_run(subject.ref);
        if (!stored) throw Error(ErrorCode::UnknownRun, "run '" + subject.ref + "' vanished during publish");
        stored->run.visibility = Visibility::Public;
        stored->run.minted_identifier = existing->identifier;
        db_->prepare("UPDATE runs SET visibility = 'public', body = ? WHERE run_id = ?")
            .bind(1, encode(stored->run))
            .bind(2, subject.ref)
            .run();
        for (const auto& id : components) {
            db_->prepare("UPDATE components SET visibility = 'public', permanent = 1 WHERE name = ? AND version = ?")
                .bind(1, id.name)
                .bind(2, id.version)
                .run();
        }
    }
    tx.commit();
    return *existing;
}

void Registry::remove(const Subject& subject, const std::string& principal) {
    std::unique_lock lock(mutex_);
    sql::Transaction tx(*db_);
    if (subject.kind == SubjectKind::Run) {
        auto stored = load_run(subject.ref);
        if (!stored) throw Error(ErrorCode::UnknownRun, "unknown run '" + subject.ref + "'");
        if (stored->owner != principal) throw Error(ErrorCode::NotOwner, "run '" + subject.ref + "' is owned by another principal");
        if (stored->run.visibility == Visibility::Public) {
            throw Error(ErrorCode::PermanentEntity, "run '" + subject.ref + "' is public and permanent");
        }
        db_->prepare("DELETE FROM runs WHERE run_id = ?").bind(1, subject.ref).run();
        tx.commit();
        return;
    }

    auto id = ComponentId::parse(subject.ref);
    auto r = load_component(id);
    if (!r) throw Error(ErrorCode::UnknownComponent, "unknown component " + subject.ref);
    if (r->metadata.owner != principal) throw Error(ErrorCode::NotOwner, subject.ref + " is owned by another principal");
    if (r->permanent) throw Error(ErrorCode::PermanentEntity, subject.ref + " is referenced by a public run and permanent");
    db_->prepare("DELETE FROM components WHERE name = ? AND version = ?").bind(1, id.name).bind(2, id.version).run();
    auto others = db_->prepare("SELECT COUNT(*) FROM components WHERE payload_hash = ?");
    others.bind(1, r->payload_hash);
    others.step();
    const bool shared = others.integer(0) > 0;
    tx.commit();
    if (!shared) {
        std::error_code ec;
        fs::remove(blob_path(r->payload_hash), ec);
    }
}

std::vector<AuditProblem> Registry::audit() const {
    std::shared_lock lock(mutex_);
    std::vector<AuditProblem> problems;
    auto s = db_->prepare("SELECT name, version, payload_hash FROM components ORDER BY name, version");
    while (s.step()) {
        ComponentId id{s.text(0), s.integer(1)};
        const std::string hash = s.text(2);
        std::ifstream in(blob_path(hash), std::ios::binary);
        if (!in) {
            problems.push_back({id, "payload blob missing"});
            continue;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        if (sha256_hex(ss.str()) != hash) problems.push_back({id, "payload bytes do not match hash"});
    }
    return problems;
}

void Registry::add_principal(const PrincipalRecord& p) {
    std::unique_lock lock(mutex_);
    db_->prepare("INSERT INTO principals (user_name, api_key_hash, active) VALUES (?,?,?)")
        .bind(1, p.user_name)
        .bind(2, p.api_key_hash)
        .bind(3, p.active)
        .run();
}

void Registry::set_principal_active(const std::string& user_name, bool active) {
    std::unique_lock lock(mutex_);
    db_->prepare("UPDATE principals SET active = ? WHERE user_name = ?").bind(1, active).bind(2, user_name).run();
    if (db_->changes() == 0) throw Error(ErrorCode::UnknownComponent, "unknown principal '" + user_name + "'");
}

std::vector<PrincipalRecord> Registry::principals() const {
    std::shared_lock lock(mutex_);
    std::vector<PrincipalRecord> out;
    auto s = db_->prepare("SELECT user_name, api_key_hash, active FROM principals ORDER BY user_name");
    while (s.step()) out.push_back({s.text(0), s.text(1), s.integer(2) != 0});
    return out;
}

}  // namespace cb
