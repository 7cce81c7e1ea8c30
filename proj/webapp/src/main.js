import { createApi } from "./api.js";
import { PlayerController } from "./controller.js";
import { mount } from "./view.js";

const config = globalThis.FLOWMOODS_CONFIG ?? {};
const params = new URLSearchParams(location.search);
const userId = params.get("user") ?? config.userId;
const api = createApi(params.get("api") ?? config.apiBase ?? "");
const controller = new PlayerController(api, { userId });

mount(document.getElementById("root"), controller);
controller.loadMoods().catch((err) => {
  document.getElementById("root").textContent = `Cannot load moods: ${err.message}`;
});
