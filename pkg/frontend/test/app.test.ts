import { beforeEach, describe, expect, it } from "vitest";

import { AnnotClient, LABELS } from "../src/api.js";
import { AnnotApp, LABEL_SPECS } from "../src/app.js";
import { BLIND_KEYS, FakeService, METHOD_NAMES } from "./fakeservice.js";

function mount(): HTMLElement {
  document.body.innerHTML = '<div id="app"></div>';
  return document.getElementById("app")!;
}

function makeApp(service: FakeService, fetchFn = service.fetch) {
  const client = new AnnotClient({ fetchFn, retryDelayMs: 1, maxRetries: 3 });
  const app = new AnnotApp(mount(), client);
  app.start();
  return app;
}

async function settle(): Promise<void> {
  // Flush the promise chains behind click handlers.
  for (let i = 0; i < 20; i++) {
    await Promise.resolve();
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

function click(selector: string): void {
  const el = document.querySelector<HTMLElement>(selector);
  expect(el, `missing element ${selector}`).toBeTruthy();
  el!.click();
}

async function registerAndBegin(name = "tess"): Promise<void> {
  const input = document.querySelector<HTMLInputElement>("#annotator-name")!;
  input.value = name;
  click("#register-button");
  await settle();
  click("#begin-button");
  await settle();
}

function scanForMethodIdentity(): void {
  const blob = (document.body.innerHTML + document.body.textContent).toLowerCase();
  for (const name of METHOD_NAMES) {
    expect(blob).not.toContain(name.toLowerCase());
  }
  for (const key of BLIND_KEYS) {
    expect(blob).not.toContain(key.toLowerCase());
  }
}

describe("annotation flow", () => {
  let service: FakeService;

  beforeEach(() => {
    service = new FakeService(2);
  });

  it("drives register -> help -> annotate -> done", async () => {
    makeApp(service);
    expect(document.querySelector(".register-screen")).toBeTruthy();
    scanForMethodIdentity();

    await registerAndBegin();
    expect(document.querySelector(".task-screen")).toBeTruthy();
    const titles = Array.from(
      document.querySelectorAll(".panel-title"),
      (el) => el.textContent,
    );
    expect(titles).toEqual([
      "Evidence",
      "Incorrect claim",
      "Correct claim (ground truth)",
      "Proposed claim",
    ]);
    expect(document.querySelector(".badge-match")).toBeTruthy();
    scanForMethodIdentity();

    click('button[data-label="CORRECT"]');
    await settle();
    expect(document.querySelector(".task-screen")).toBeTruthy();
    scanForMethodIdentity();

    click('button[data-label="INCORRECT_CLAIM"]');
    await settle();
    expect(document.querySelector(".done-screen")).toBeTruthy();
    scanForMethodIdentity();

    expect(service.storedCount()).toBe(2);
    expect([...service.judgments.values()]).toEqual(["CORRECT", "INCORRECT_CLAIM"]);
  });

  it("maps the three buttons onto the three enum values", async () => {
    makeApp(service);
    await registerAndBegin();
    const buttons = Array.from(
      document.querySelectorAll<HTMLButtonElement>("button.judgment"),
    );
    expect(buttons.map((b) => b.dataset.label)).toEqual([...LABELS]);
    expect(LABEL_SPECS.map((s) => s.label)).toEqual([...LABELS]);
  });

  it("maps keyboard shortcuts 1/2/3 to the labels deterministically", async () => {
    makeApp(service);
    await registerAndBegin();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "3" }));
    await settle();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "2" }));
    await settle();
    expect([...service.judgments.values()]).toEqual([
      "CORRECT_BUT_UNRELATED",
      "INCORRECT_CLAIM",
    ]);
  });

  it("prevents double submission from rapid clicks", async () => {
    makeApp(service);
    await registerAndBegin();
    const button = document.querySelector<HTMLButtonElement>(
      'button[data-label="CORRECT"]',
    )!;
    button.click();
    button.click();
    button.click();
    await settle();
    // one judgment for the first task; later clicks were locked out
    expect(service.judgments.get("t0|a-0")).toBe("CORRECT");
    expect(service.storedCount()).toBeLessThanOrEqual(2);
    expect(service.submitCalls).toBeLessThanOrEqual(2);
  });

  it("retries an offline submit without creating duplicates", async () => {
    let failNext = 1;
    const flaky = async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = typeof input === "string" ? input : input.toString();
      if (url.endsWith("/judgments") && failNext > 0) {
        failNext -= 1;
        // the request reached the service, the response was lost
        await service.fetch(input, init);
        throw new TypeError("network dropped");
      }
      return service.fetch(input, init);
    };
    makeApp(service, flaky);
    await registerAndBegin();
    click('button[data-label="CORRECT"]');
    await settle();
    // retried exactly once, idempotent service stored a single judgment
    expect(service.judgments.get("t0|a-0")).toBe("CORRECT");
    expect(
      [...service.judgments.keys()].filter((k) => k.startsWith("t0|")).length,
    ).toBe(1);
    expect(document.querySelector(".task-screen")).toBeTruthy();
  });

  it("shows the done screen immediately when no tasks are eligible", async () => {
    service = new FakeService(0);
    makeApp(service);
    await registerAndBegin();
    expect(document.querySelector(".done-screen")).toBeTruthy();
  });

  it("shows a reassigned notice on lease expiry and fetches the next task", async () => {
    let expireOnce = true;
    const expiring = async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = typeof input === "string" ? input : input.toString();
      if (url.endsWith("/judgments") && expireOnce) {
        expireOnce = false;
        return new Response(
          JSON.stringify({ detail: "lease expired; task returned to the pool" }),
          { status: 400 },
        );
      }
      return service.fetch(input, init);
    };
    makeApp(service, expiring);
    await registerAndBegin();
    click('button[data-label="CORRECT"]');
    await settle();
    expect(document.querySelector(".notice")?.textContent).toContain("reassigned");
    expect(document.querySelector(".task-screen")).toBeTruthy();
  });

  it("help panel defines all three labels before the first task", async () => {
    makeApp(service);
    const input = document.querySelector<HTMLInputElement>("#annotator-name")!;
    input.value = "tess";
    click("#register-button");
    await settle();
    const defs = document.querySelectorAll(".label-definitions dd");
    expect(defs.length).toBe(3);
    expect(document.querySelector(".help-screen")).toBeTruthy();
  });
});
