// DOM rendering for the mood wheel, the now-playing card and the queue.

const TRACK_SECONDS = 30;

function el(tag, attrs = {}, ...children) {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) {
    if (k === "onclick") node.addEventListener("click", v);
    else if (k === "class") node.className = v;
    else node.setAttribute(k, v);
  }
  for (const c of children) if (c != null) node.append(c);
  return node;
}

export function mount(root, controller) {
  let timer = null;
  let elapsed = 0;
  let shownTrack = null;

  function wheel(view) {
    const ring = el("div", { class: "wheel" });
    const n = view.moods.length;
    view.moods.forEach((m, i) => {
      const angle = (360 / n) * i - 90;
      const active = view.mood === m.id;
      ring.append(
        el("button", {
          class: `slice${active ? " active" : ""}`,
          style: `transform: rotate(${angle}deg) translate(8.5rem) rotate(${-angle}deg)`,
          title: m.description,
          onclick: () => controller.selectMood(m.id),
        }, m.name),
      );
    });
    ring.append(el("button", {
      class: `center${view.mood === null ? " active" : ""}`,
      onclick: () => controller.selectMood(null),
    }, "Flow"));
    return ring;
  }

  function player(view) {
    if (!view.session_id) return el("p", { class: "hint" }, "Pick a mood to start, or the center for regular Flow.");
    const t = view.track;
    const controls = el("div", { class: "controls" },
      ...[["like", "Like"], ["skip", "Skip"], ["exclude_song", "Not this song"], ["exclude_artist", "Not this artist"]]
        .map(([kind, label]) => el("button", { onclick: () => controller.feedback(kind), ...(view.pending ? { disabled: "" } : {}) }, label)),
    );
    const card = el("div", { class: "card" },
      view.fallback ? el("span", { class: "badge" }, "popular picks") : null,
      t ? el("h2", {}, t.title || t.song_id)
        : el("button", { class: "next", onclick: () => controller.next() }, "Play next"),
      t ? el("p", { class: "artist" }, t.artist) : null,
      t && view.artist_weight !== 1 ? el("p", { class: "weight" }, `artist weight ${view.artist_weight.toFixed(2)}`) : null,
      t?.mood_score != null ? el("p", { class: "score" }, `mood score ${t.mood_score.toFixed(2)}`) : null,
      el("progress", { max: String(TRACK_SECONDS), value: String(elapsed) }),
      controls,
    );
    const queue = el("ol", { class: "queue" }, ...view.queue.map((q) => el("li", {}, `${q.title || q.song_id} - ${q.artist}`)));
    return el("div", { class: "player" }, card, el("h3", {}, "Up next"), queue);
  }

  function banner(view) {
    if (!view.error) return null;
    const b = el("div", { class: `error ${view.error.kind}` }, view.error.message);
    if (view.error.retry) b.append(el("button", { onclick: () => view.error.retry() }, "Retry"));
    return b;
  }

  function tick() {
    elapsed += 1;
    const bar = root.querySelector("progress");
    if (bar) bar.value = elapsed;
    if (elapsed >= TRACK_SECONDS) controller.next();
  }

  function render(view) {
    const id = view.track?.song_id ?? null;
    if (id !== shownTrack) {
      shownTrack = id;
      elapsed = 0;
      clearInterval(timer);
      timer = id ? setInterval(tick, 1000) : null;
    }
    root.replaceChildren(el("div", { class: "app" }, wheel(view), banner(view), player(view)));
  }

  controller.subscribe(render);
  render(controller.view());
}
