// Thin client for the /v1 HTTP API.

export class ApiError extends Error {
  constructor(status, code, message) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

export function createApi(base = "", fetchImpl = globalThis.fetch.bind(globalThis)) {
  const root = base.replace(/\/+$/, "");

  async function call(method, path, body) {
    let res;
    try {
      res = await fetchImpl(root + path, {
        method,
        headers: body === undefined ? {} : { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "unreachable", `service unreachable: ${err.message}`);
    }
    let payload = null;
    try {
      payload = await res.json();
    } catch {
      payload = null;
    }
    if (!res.ok) {
      throw new ApiError(res.status, payload?.code ?? "http_error", payload?.message ?? `HTTP ${res.status}`);
    }
    return payload;
  }

  const session = (id) => `/v1/session/${encodeURIComponent(id)}`;
  return {
    moods: () => call("GET", "/v1/moods"),
    health: () => call("GET", "/v1/health"),
    startSession: (userId, mood) => call("POST", "/v1/session", { user_id: userId, mood }),
    next: (id) => call("POST", `${session(id)}/next`),
    feedback: (id, eventId, kind, songId) =>
      call("POST", `${session(id)}/feedback`, { event_id: eventId, kind, song_id: songId }),
    getSession: (id) => call("GET", session(id)),
  };
}
