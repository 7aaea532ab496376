/** DOM bootstrap: wires the store to the page. Exported as a function so
 * tests can mount the app against a live service. */

import { ApiClient } from "./api.js";
import { applyHint } from "./hints.js";
import { AttemptHistory } from "./history.js";
import {
  renderFeedback,
  renderGutter,
  renderHistory,
  renderQuestionList,
  renderSchema,
} from "./render.js";
import { Store } from "./store.js";

const PAGE = `
<header><h1>SQL practice</h1></header>
<main>
  <nav id="questions"></nav>
  <section id="editor">
    <div class="editor-row">
      <pre id="gutter">1</pre>
      <textarea id="sql" spellcheck="false" rows="8"
        placeholder="type your query here"></textarea>
    </div>
    <button id="submit">Submit</button>
    <div id="feedback"></div>
  </section>
  <aside>
    <h2>Schema</h2>
    <div id="schema"></div>
    <h2>Your attempts</h2>
    <div id="history"></div>
  </aside>
</main>
`;

export async function mountApp(
  root: HTMLElement,
  baseUrl = "",
  storage: Storage = window.localStorage,
): Promise<Store> {
  root.innerHTML = PAGE;
  const store = new Store(new ApiClient(baseUrl), new AttemptHistory(storage));

  const el = <T extends HTMLElement>(sel: string) =>
    root.querySelector(sel) as T;
  const questionsEl = el<HTMLElement>("#questions");
  const schemaEl = el<HTMLElement>("#schema");
  const feedbackEl = el<HTMLElement>("#feedback");
  const historyEl = el<HTMLElement>("#history");
  const gutterEl = el<HTMLElement>("#gutter");
  const sqlEl = el<HTMLTextAreaElement>("#sql");
  const submitEl = el<HTMLButtonElement>("#submit");

  function redraw(): void {
    questionsEl.innerHTML = renderQuestionList(
      store.questions,
      store.selected?.id ?? null,
    );
    schemaEl.innerHTML = renderSchema(store.schema);
    feedbackEl.innerHTML = renderFeedback(store.view);
    historyEl.innerHTML = renderHistory(store.attempts());
    gutterEl.textContent = renderGutter(store.sql);
    submitEl.disabled = store.submitDisabled;
    if (sqlEl.value !== store.sql) sqlEl.value = store.sql;
  }

  store.subscribe(redraw);

  sqlEl.addEventListener("input", () => {
    store.setSql(sqlEl.value);
    gutterEl.textContent = renderGutter(store.sql);
  });

  submitEl.addEventListener("click", () => {
    void store.submit();
  });

  questionsEl.addEventListener("click", (ev) => {
    const li = (ev.target as HTMLElement).closest("li[data-question]");
    if (li) store.select(li.getAttribute("data-question")!);
  });

  // "apply" buttons next to mechanical hints patch the SQL in place;
  // the student still resubmits explicitly.
  feedbackEl.addEventListener("click", (ev) => {
    const btn = (ev.target as HTMLElement).closest("button.apply");
    if (!btn) return;
    const patched = applyHint(store.sql, btn.getAttribute("data-hint")!);
    if (patched !== null) {
      store.setSql(patched);
      redraw();
    }
  });

  await store.load();
  return store;
}

declare global {
  interface Window {
    __sqlgradeStore?: Store;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void mountApp(document.getElementById("app")!).then((store) => {
    window.__sqlgradeStore = store;
  });
}
