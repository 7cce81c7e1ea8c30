// Runtime settings; both can also be given as ?api=...&user=... in the URL.
globalThis.FLOWMOODS_CONFIG = {
  apiBase: "",
  userId: "",
};
