/** Browser entry point: mounts the app on #app using the page URL. */

import { initApp } from "./app.js";

const root = document.getElementById("app");
if (root !== null) {
  const handles = initApp(root, window.location.search);
  handles.done.catch((err) => {
    console.error("labeling app failed:", err);
  });
}
