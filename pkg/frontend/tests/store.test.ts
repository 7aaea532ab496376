import { beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { AttemptHistory } from "../src/history.js";
import { Store } from "../src/store.js";

function memoryStorage(): Storage {
  const m = new Map<string, string>();
  return {
    get length() {
      return m.size;
    },
    clear: () => m.clear(),
    getItem: (k: string) => m.get(k) ?? null,
    key: (i: number) => [...m.keys()][i] ?? null,
    removeItem: (k: string) => void m.delete(k),
    setItem: (k: string, v: string) => void m.set(k, v),
  };
}

const QUESTIONS = {
  questions: [
    { id: "q1", text: "first", max_marks: 10, feedback: "all" },
    { id: "q2", text: "second", max_marks: 5, feedback: "correct-only" },
  ],
};
const SCHEMA = { relations: [] };

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("Store", () => {
  beforeEach(() => {
    vi.restoreAllMocks();
  });

  function makeStore(): Store {
    return new Store(new ApiClient(""), new AttemptHistory(memoryStorage()));
  }

  it("loads questions and schema, selecting the first question", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) =>
        url.endsWith("/questions") ? jsonResponse(QUESTIONS) : jsonResponse(SCHEMA),
      ),
    );
    const store = makeStore();
    await store.load();
    expect(store.questions.map((q) => q.id)).toEqual(["q1", "q2"]);
    expect(store.selected?.id).toBe("q1");
    expect(store.submitDisabled).toBe(false);
  });

  it("refuses concurrent submits: one in-flight request at a time", async () => {
    let resolveFeedback!: (r: Response) => void;
    const gate = new Promise<Response>((res) => (resolveFeedback = res));
    const fetchMock = vi.fn(async (url: string) => {
      if (url.endsWith("/questions")) return jsonResponse(QUESTIONS);
      if (url.endsWith("/schema")) return jsonResponse(SCHEMA);
      return gate;
    });
    vi.stubGlobal("fetch", fetchMock);

    const store = makeStore();
    await store.load();
    store.setSql("SELECT 1 FROM t");

    const first = store.submit();
    expect(store.submitDisabled).toBe(true);
    expect(await store.submit()).toBe(false); // second submit refused

    resolveFeedback(
      jsonResponse({ outcome: "Matched", equivalent: true, marks_fraction: 1, edits: [] }),
    );
    expect(await first).toBe(true);
    expect(store.submitDisabled).toBe(false);
    const feedbackCalls = fetchMock.mock.calls.filter(([u]) =>
      String(u).endsWith("/feedback"),
    );
    expect(feedbackCalls).toHaveLength(1);
  });

  it("maps an equivalent response to the success banner state and records history", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) => {
        if (url.endsWith("/questions")) return jsonResponse(QUESTIONS);
        if (url.endsWith("/schema")) return jsonResponse(SCHEMA);
        return jsonResponse({
          outcome: "Matched",
          equivalent: true,
          marks_fraction: 1,
          edits: [],
        });
      }),
    );
    const store = makeStore();
    await store.load();
    store.setSql("SELECT 1");
    await store.submit();
    expect(store.view.kind).toBe("equivalent");
    expect(store.attempts()).toHaveLength(1);
    expect(store.attempts()[0].outcome).toBe("Matched");
  });

  it("maps a near-miss to the edits view", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) => {
        if (url.endsWith("/questions")) return jsonResponse(QUESTIONS);
        if (url.endsWith("/schema")) return jsonResponse(SCHEMA);
        return jsonResponse({
          outcome: "Matched",
          equivalent: false,
          marks_fraction: 0.7,
          edits: ["add the condition t.a = 1"],
        });
      }),
    );
    const store = makeStore();
    await store.load();
    store.setSql("SELECT 1");
    await store.submit();
    expect(store.view).toEqual({
      kind: "edits",
      outcome: "Matched",
      marksFraction: 0.7,
      edits: ["add the condition t.a = 1"],
    });
  });

  it("maps 422 to a syntax-error view anchored at line/column", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) => {
        if (url.endsWith("/questions")) return jsonResponse(QUESTIONS);
        if (url.endsWith("/schema")) return jsonResponse(SCHEMA);
        return jsonResponse(
          { detail: { diagnostics: "unexpected token", line: 2, column: 7 } },
          422,
        );
      }),
    );
    const store = makeStore();
    await store.load();
    store.setSql("SELEC 1");
    await store.submit();
    expect(store.view).toEqual({
      kind: "syntax-error",
      diagnostics: "unexpected token",
      line: 2,
      column: 7,
    });
    expect(store.attempts()).toHaveLength(0); // failed parses are not history
  });

  it("switching questions clears the editor and feedback", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn(async (url: string) =>
        url.endsWith("/questions") ? jsonResponse(QUESTIONS) : jsonResponse(SCHEMA),
      ),
    );
    const store = makeStore();
    await store.load();
    store.setSql("SELECT 1");
    store.select("q2");
    expect(store.selected?.id).toBe("q2");
    expect(store.sql).toBe("");
    expect(store.view.kind).toBe("idle");
  });
});
