/** Browser entry point; service base URL comes from a query parameter. */

import { ApiClient } from "./api.js";
import { ChatApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8080";

const root = document.getElementById("app");
if (root) {
  const app = new ChatApp(root, new ApiClient(baseUrl));
  const bindings: Record<string, string> = {};
  for (const role of ["series", "sensors", "streets"]) {
    const record = params.get(role);
    if (record) bindings[role] = record;
  }
  void app.start(bindings);
}
