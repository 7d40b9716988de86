import { AnnotClient } from "./api.js";
import { AnnotApp } from "./app.js";

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app mount point");
}
// The UI is served from /ui; the API lives at the service root.
const app = new AnnotApp(root, new AnnotClient({ baseUrl: "" }));
app.start();
