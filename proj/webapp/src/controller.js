// Player state machine. Owns no DOM; the view subscribes and renders
// whatever view() returns.

export const CENTER = null;
export const FEEDBACK_KINDS = ["like", "skip", "exclude_song", "exclude_artist"];

let eventCounter = 0;
export function defaultEventId() {
  eventCounter += 1;
  const random = Math.random().toString(36).slice(2, 10);
  return `ev-${Date.now().toString(36)}-${eventCounter}-${random}`;
}

export class PlayerController {
  constructor(api, { userId, previewSize = 5, newEventId = defaultEventId } = {}) {
    this.api = api;
    this.userId = userId;
    this.previewSize = previewSize;
    this.newEventId = newEventId;
    this.moods = [];
    this.summary = null;
    this.error = null;
    this.pending = false;
    this.listeners = new Set();
  }

  subscribe(fn) {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  emit() {
    for (const fn of this.listeners) fn(this.view());
  }

  async loadMoods() {
    const moods = await this.api.moods();
    if (!Array.isArray(moods) || moods.length !== 6) {
      throw new Error(`expected six moods from /v1/moods, got ${Array.isArray(moods) ? moods.length : "none"}`);
    }
    this.moods = moods;
    this.emit();
    return moods;
  }

  /// The seven legal wheel positions: six mood ids and the center.
  selections() {
    return [...this.moods.map((m) => m.id), CENTER];
  }

  async selectMood(selection) {
    if (!this.selections().includes(selection)) throw new Error(`illegal wheel selection '${selection}'`);
    if (!this.userId) throw new Error("no user configured");
    return this.run(async () => {
      this.summary = null;
      const started = await this.api.startSession(this.userId, selection);
      this.summary = await this.api.getSession(started.session_id);
    }, () => this.selectMood(selection));
  }

  async next() {
    if (!this.summary) return false;
    const id = this.summary.session_id;
    return this.run(async () => {
      await this.api.next(id);
      this.summary = await this.api.getSession(id);
    }, () => this.next());
  }

  async feedback(kind) {
    if (!FEEDBACK_KINDS.includes(kind)) throw new Error(`unknown feedback kind '${kind}'`);
    if (!this.summary?.track) return false;
    const id = this.summary.session_id;
    const songId = this.summary.track.song_id;
    // One event id per user action; a retry resends the same id so the
    // service applies it once.
    const eventId = this.newEventId();
    const attempt = () =>
      this.run(async () => {
        await this.api.feedback(id, eventId, kind, songId);
        if (kind === "skip") await this.api.next(id);
        this.summary = await this.api.getSession(id);
      }, attempt);
    return attempt();
  }

  // At most one request chain in flight; calls made meanwhile are dropped.
  async run(work, retry) {
    if (this.pending) return false;
    this.pending = true;
    this.error = null;
    this.emit();
    try {
      await work();
      return true;
    } catch (err) {
      this.error = describe(err, retry);
      return false;
    } finally {
      this.pending = false;
      this.emit();
    }
  }

  view() {
    const s = this.summary;
    const excluded = new Set(s?.excluded_artists ?? []);
    const visible = (t) => t && !excluded.has(t.artist_id);
    const track = s && visible(s.track) ? s.track : null;
    return {
      moods: this.moods,
      pending: this.pending,
      error: this.error,
      session_id: s?.session_id ?? null,
      mood: s ? s.mood : undefined,
      model_version: s?.model_version ?? null,
      track,
      queue: (s?.queue ?? []).filter(visible).slice(0, this.previewSize),
      fallback: s?.fallback_active ?? false,
      artist_weight: track ? s.artist_weights?.[track.artist_id] ?? 1 : null,
      plays: s?.plays ?? 0,
    };
  }
}

function describe(err, retry) {
  const status = err?.status ?? 0;
  if (status === 403) {
    return {
      kind: "ineligible",
      message: "This account needs at least 16 favorite songs or artists before mood sessions are available.",
    };
  }
  if (status === 404 && err.code === "not_found") {
    return { kind: "not_found", message: err.message };
  }
  return { kind: "retryable", message: err?.message ?? String(err), retry };
}
