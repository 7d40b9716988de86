/**
 * Blind annotation flow: register -> help -> (task -> submit)* -> done.
 *
 * The task screen shows four labeled panels (evidence, incorrect claim,
 * ground-truth correct claim, proposed claim) plus equality badges, and
 * exactly three judgment buttons mapped to keys 1/2/3. Submissions are
 * locked while one is in flight, so double clicks cannot produce two
 * judgments.
 */

import {
  AnnotClient,
  JudgmentLabel,
  LeaseExpiredError,
  TaskView,
} from "./api.js";

interface LabelSpec {
  label: JudgmentLabel;
  key: string;
  button: string;
  definition: string;
}

export const LABEL_SPECS: readonly LabelSpec[] = [
  {
    label: "CORRECT",
    key: "1",
    button: "Correct",
    definition:
      "The proposed claim is true given the evidence and talks about the " +
      "same topics as the incorrect claim.",
  },
  {
    label: "INCORRECT_CLAIM",
    key: "2",
    button: "Incorrect claim",
    definition:
      "The proposed claim keeps the incorrect claim's meaning, or is wrong " +
      "with respect to the evidence in some other way.",
  },
  {
    label: "CORRECT_BUT_UNRELATED",
    key: "3",
    button: "Correct but unrelated",
    definition:
      "The proposed claim may be true but does not address the incorrect " +
      "claim (for example a trivial statement or a restated evidence dump).",
  },
];

type Screen = "register" | "help" | "task" | "done";

export class AnnotApp {
  private client: AnnotClient;
  private root: HTMLElement;
  private annotatorId: string | null = null;
  private task: TaskView | null = null;
  private screen: Screen = "register";
  private submitting = false;
  private judged = 0;
  private notice: string | null = null;
  private taskStartedAt = 0;
  private timerHandle: ReturnType<typeof setInterval> | null = null;

  constructor(root: HTMLElement, client: AnnotClient) {
    this.root = root;
    this.client = client;
    document.addEventListener("keydown", (event) => this.onKey(event));
  }

  start(): void {
    this.render();
  }

  private onKey(event: KeyboardEvent): void {
    if (this.screen !== "task" || this.submitting) {
      return;
    }
    const spec = LABEL_SPECS.find((s) => s.key === event.key);
    if (spec) {
      void this.submit(spec.label);
    }
  }

  private async registerAndBegin(name: string): Promise<void> {
    this.annotatorId = await this.client.register(name);
    this.screen = "help";
    this.render();
  }

  private async fetchNext(): Promise<void> {
    if (!this.annotatorId) {
      return;
    }
    this.task = await this.client.nextTask(this.annotatorId);
    this.screen = this.task ? "task" : "done";
    this.taskStartedAt = Date.now();
    this.render();
  }

  private async submit(label: JudgmentLabel): Promise<void> {
    if (!this.task || !this.annotatorId || this.submitting) {
      return;
    }
    this.submitting = true;
    this.render();
    try {
      await this.client.submitJudgment(this.annotatorId, this.task.task_id, label);
      this.judged += 1;
      this.notice = null;
    } catch (err) {
      if (err instanceof LeaseExpiredError) {
        this.notice = "That task was reassigned after a timeout; here is a new one.";
      } else {
        throw err;
      }
    } finally {
      this.submitting = false;
    }
    await this.fetchNext();
  }

  private startTimer(el: HTMLElement): void {
    if (this.timerHandle !== null) {
      clearInterval(this.timerHandle);
    }
    const update = () => {
      const seconds = Math.floor((Date.now() - this.taskStartedAt) / 1000);
      el.textContent = `${seconds}s on this task`;
    };
    update();
    this.timerHandle = setInterval(update, 1000);
  }

  private render(): void {
    this.root.textContent = "";
    switch (this.screen) {
      case "register":
        this.renderRegister();
        break;
      case "help":
        this.renderHelp();
        break;
      case "task":
        this.renderTask();
        break;
      case "done":
        this.renderDone();
        break;
    }
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    node.className = className;
    if (text !== undefined) {
      node.textContent = text;
    }
    return node;
  }

  private renderRegister(): void {
    const box = this.el("div", "screen register-screen");
    box.appendChild(this.el("h1", "title", "Claim correction review"));
    box.appendChild(
      this.el(
        "p",
        "intro",
        "You will read a passage of evidence and judge whether a proposed " +
          "rewrite of an incorrect claim is a good correction.",
      ),
    );
    const input = this.el("input", "name-input");
    input.id = "annotator-name";
    input.placeholder = "Your name";
    const button = this.el("button", "primary", "Start");
    button.id = "register-button";
    button.addEventListener("click", () => {
      if (input.value.trim()) {
        void this.registerAndBegin(input.value.trim());
      }
    });
    box.appendChild(input);
    box.appendChild(button);
    this.root.appendChild(box);
  }

  private renderHelp(): void {
    const box = this.el("div", "screen help-screen");
    box.appendChild(this.el("h1", "title", "Before you begin"));
    box.appendChild(
      this.el(
        "p",
        "intro",
        "Each task shows the evidence, the original incorrect claim, the " +
          "ground-truth correct claim, and a proposed claim. Pick one of " +
          "three labels (keyboard 1/2/3):",
      ),
    );
    const list = this.el("dl", "label-definitions");
    for (const spec of LABEL_SPECS) {
      list.appendChild(this.el("dt", "label-name", `${spec.key}. ${spec.button}`));
      list.appendChild(this.el("dd", "label-def", spec.definition));
    }
    box.appendChild(list);
    const button = this.el("button", "primary", "Begin");
    button.id = "begin-button";
    button.addEventListener("click", () => void this.fetchNext());
    box.appendChild(button);
    this.root.appendChild(box);
  }

  private panel(title: string, body: string[] | string): HTMLElement {
    const panel = this.el("section", "panel");
    panel.appendChild(this.el("h2", "panel-title", title));
    const texts = Array.isArray(body) ? body : [body];
    for (const text of texts) {
      panel.appendChild(this.el("p", "panel-body", text));
    }
    return panel;
  }

  private renderTask(): void {
    const task = this.task;
    if (!task) {
      return;
    }
    const box = this.el("div", "screen task-screen");
    if (this.notice) {
      box.appendChild(this.el("p", "notice", this.notice));
    }
    const meta = this.el("div", "meta");
    meta.appendChild(this.el("span", "progress", `${this.judged} judged`));
    const timer = this.el("span", "timer");
    meta.appendChild(timer);
    box.appendChild(meta);

    box.appendChild(this.panel("Evidence", task.evidence));
    box.appendChild(this.panel("Incorrect claim", task.incorrect_claim));
    box.appendChild(this.panel("Correct claim (ground truth)", task.correct_claim));
    const proposed = this.panel("Proposed claim", task.proposed_claim);
    const badges = this.el("div", "badges");
    if (task.flags.equals_correct) {
      badges.appendChild(this.el("span", "badge badge-match", "matches correct claim"));
    }
    if (task.flags.equals_incorrect) {
      badges.appendChild(
        this.el("span", "badge badge-warn", "matches incorrect claim"),
      );
    }
    proposed.appendChild(badges);
    box.appendChild(proposed);

    const buttons = this.el("div", "judgment-buttons");
    for (const spec of LABEL_SPECS) {
      const button = this.el("button", "judgment", `${spec.key}. ${spec.button}`);
      button.dataset.label = spec.label;
      button.disabled = this.submitting;
      button.addEventListener("click", () => void this.submit(spec.label));
      buttons.appendChild(button);
    }
    box.appendChild(buttons);
    this.root.appendChild(box);
    this.startTimer(timer);
  }

  private renderDone(): void {
    if (this.timerHandle !== null) {
      clearInterval(this.timerHandle);
      this.timerHandle = null;
    }
    const box = this.el("div", "screen done-screen");
    box.appendChild(this.el("h1", "title", "All done"));
    box.appendChild(
      this.el(
        "p",
        "intro",
        `There are no more tasks for you right now. You judged ${this.judged} ` +
          "in this session. Thank you!",
      ),
    );
    this.root.appendChild(box);
  }
}
