/**
 * In-page instrumentation shim.
 *
 * Hooks every observable channel (dialogs, console, network, errors) before
 * any payload content enters the page, records what the payload did as an
 * append-only event list, and serializes it as a trace JSON document for the
 * automation driver to read back.
 *
 * Containment model: record-and-block. Network-bearing attributes are
 * stripped at parse time (intent recorded), fetch/XHR/sendBeacon/form
 * submission are wrapped so nothing leaves the page, and anchor navigation
 * is cancelled with the target URL recorded. Element lifecycle events that
 * a blocked load would have produced (img error, svg load) are synthesized
 * exactly once, so payload handlers still fire deterministically in any
 * host environment.
 */

export type InjectionContext = "html_body" | "script" | "attribute";

export type TraceStatus = "completed" | "timeout" | "crashed";

export type TraceEventRow =
  | { kind: "alert"; message: string }
  | { kind: "console"; level: string; message: string }
  | { kind: "network"; method: string; url: string }
  | { kind: "error"; message: string };

export interface TraceDocument {
  status: TraceStatus;
  duration_ms: number;
  events: TraceEventRow[];
}

/** Console lines the shim emits about itself; trace consumers filter them. */
export const HARNESS_NOISE_PREFIX = "__harness__";

/** Tags whose src attribute triggers a resource load when inserted. */
const LOADING_TAGS = new Set([
  "img",
  "script",
  "iframe",
  "embed",
  "audio",
  "video",
  "source",
  "track",
  "input",
]);

const CONSOLE_LEVELS = ["log", "info", "warn", "error", "debug"] as const;

const MAX_CLICK_TARGETS = 200;

export interface ShimOptions {
  /**
   * Dispatch one synthetic click per injected element after insertion, so
   * gesture-gated vectors (onclick handlers, javascript: hrefs) execute
   * without a user. On by default; disable for gesture-free runs.
   */
  clickInjected?: boolean;
}

interface HookedWindow extends Window {
  __harnessRun?: (
    payload: string,
    context: string,
    timeoutMs: number,
    settleMs: number,
  ) => Promise<string>;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class HarnessShim {
  private readonly win: Window & typeof globalThis;
  private readonly clickInjected: boolean;
  private readonly events: TraceEventRow[] = [];
  private sealed = false;
  private sealedJson: string | null = null;
  private startTime = Date.now();
  private lastActivity = Date.now();
  private status: TraceStatus = "completed";
  private installed = false;
  private ran = false;

  constructor(win: Window, options: ShimOptions = {}) {
    this.win = win as Window & typeof globalThis;
    this.clickInjected = options.clickInjected ?? true;
  }

  /** Append one event unless the trace is already sealed. */
  private record(event: TraceEventRow): void {
    if (this.sealed) {
      return;
    }
    this.events.push(event);
    this.lastActivity = Date.now();
  }

  private resolveUrl(raw: string): string {
    try {
      return new this.win.URL(raw, this.win.document.baseURI).href;
    } catch {
      return raw;
    }
  }

  private recordNetwork(method: string, url: string): void {
    this.record({ kind: "network", method, url: this.resolveUrl(url) });
  }

  /**
   * Install every hook. Must run before any payload content is injected;
   * the page guarantees that ordering structurally (hooks in head, payload
   * only via __harnessRun after load).
   */
  install(): void {
    if (this.installed) {
      return;
    }
    this.installed = true;
    const w = this.win;

    // dialogs: record as alert events and return neutral values without
    // blocking, so payload control flow continues deterministically
    w.alert = (message?: unknown): void => {
      this.record({ kind: "alert", message: String(message) });
    };
    w.confirm = (message?: unknown): boolean => {
      this.record({ kind: "alert", message: String(message) });
      return false;
    };
    w.prompt = (message?: unknown): string => {
      this.record({ kind: "alert", message: String(message) });
      return "";
    };

    // console: record, then delegate to the real implementation
    for (const level of CONSOLE_LEVELS) {
      const original = w.console[level].bind(w.console);
      w.console[level] = (...args: unknown[]): void => {
        this.record({
          kind: "console",
          level,
          message: args.map(String).join(" "),
        });
        original(...args);
      };
    }

    // fetch: record the request, never send it; the returned promise stays
    // pending forever so awaiting payloads idle until collection settles
    (w as { fetch: unknown }).fetch = (
      input: unknown,
      init?: { method?: string },
    ): Promise<never> => {
      const method = (init?.method ?? "GET").toUpperCase();
      this.recordNetwork(method, String(input));
      return new Promise<never>(() => {});
    };

    // XHR: record on send, never transmit
    const shim = this;
    const xhrProto = w.XMLHttpRequest?.prototype as
      | (XMLHttpRequest & { __harnessMethod?: string; __harnessUrl?: string })
      | undefined;
    if (xhrProto) {
      const originalOpen = xhrProto.open;
      xhrProto.open = function (
        this: XMLHttpRequest & { __harnessMethod?: string; __harnessUrl?: string },
        method: string,
        url: string | URL,
        ...rest: unknown[]
      ): void {
        this.__harnessMethod = String(method).toUpperCase();
        this.__harnessUrl = String(url);
        return (originalOpen as (...a: unknown[]) => void).call(
          this,
          method,
          url,
          ...rest,
        );
      } as typeof xhrProto.open;
      xhrProto.send = function (
        this: XMLHttpRequest & { __harnessMethod?: string; __harnessUrl?: string },
      ): void {
        shim.recordNetwork(this.__harnessMethod ?? "GET", this.__harnessUrl ?? "");
      } as typeof xhrProto.send;
    }

    // sendBeacon: record, report success, send nothing
    try {
      (w.navigator as { sendBeacon?: unknown }).sendBeacon = (
        url: string | URL,
      ): boolean => {
        this.recordNetwork("POST", String(url));
        return true;
      };
    } catch {
      // navigator may be sealed in exotic hosts; beacon then stays native-less
    }

    // form submissions: the submit event covers declarative and
    // requestSubmit paths; the prototype wrap covers programmatic .submit()
    // which never fires the event
    w.document.addEventListener(
      "submit",
      (event) => {
        const form = event.target as HTMLFormElement | null;
        event.preventDefault();
        if (form) {
          this.recordNetwork((form.method || "GET").toUpperCase(), form.action);
        }
      },
      true,
    );
    const formProto = w.HTMLFormElement?.prototype;
    if (formProto) {
      formProto.submit = function (this: HTMLFormElement): void {
        shim.recordNetwork((this.method || "GET").toUpperCase(), this.action);
      };
    }

    // anchors whose navigation was blocked at parse time: record the
    // stored target on click and cancel; javascript: hrefs are left alone
    // so native activation runs them
    w.document.addEventListener(
      "click",
      (event) => {
        const target = event.target as Element | null;
        const anchor = target?.closest?.("a[data-harness-href]");
        const url = anchor?.getAttribute("data-harness-href");
        if (url) {
          event.preventDefault();
          this.recordNetwork("GET", url);
        }
      },
      true,
    );

    // uncaught errors (runtime and parse) and unhandled rejections
    w.addEventListener(
      "error",
      (event) => {
        const message = event.message || String(event.error ?? "");
        if (message) {
          this.record({ kind: "error", message });
        }
      },
      true,
    );
    w.addEventListener("unhandledrejection", (event) => {
      this.record({
        kind: "error",
        message: String((event as PromiseRejectionEvent).reason),
      });
    });
  }

  /**
   * Neutralize one parsed-but-not-yet-inserted element and return the
   * lifecycle event a real load would have produced, if any.
   *
   * src is recorded as network intent and stripped (the load is blocked);
   * the element's error handler still deserves to fire, so the caller
   * synthesizes "error" after insertion. svg fires "load" on insertion in
   * real browsers; synthesized here so every host behaves identically. The
   * handler source is stashed in a data attribute and the on* attribute
   * removed, so a host that fires the lifecycle event natively finds no
   * handler at insertion time; only the synthetic invocation runs it.
   */
  private neutralize(el: Element): "load" | "error" | null {
    const tag = el.tagName.toLowerCase();
    let lifecycle: "load" | "error" | null = null;
    if (LOADING_TAGS.has(tag)) {
      const src = el.getAttribute("src");
      if (src === null) {
        return null;
      }
      this.recordNetwork("GET", src);
      el.removeAttribute("src");
      if (tag === "script") {
        el.textContent = "";
      }
      lifecycle = "error";
    } else if (tag === "link") {
      const href = el.getAttribute("href");
      if (href !== null) {
        this.recordNetwork("GET", href);
        el.removeAttribute("href");
      }
      return null;
    } else if (tag === "a") {
      const href = el.getAttribute("href") ?? "";
      if (href && !/^\s*javascript:/i.test(href)) {
        el.setAttribute("data-harness-href", href);
        el.removeAttribute("href");
      }
      return null;
    } else if (tag === "svg") {
      lifecycle = "load";
    } else {
      return null;
    }
    const attr = "on" + lifecycle;
    const source = el.getAttribute(attr);
    if (source === null) {
      return null;
    }
    el.setAttribute("data-harness-" + attr, source);
    el.removeAttribute(attr);
    return lifecycle;
  }

  /**
   * Run one stashed lifecycle handler exactly once. The handler attribute
   * is restored only here, then the compiled reflection is invoked directly
   * rather than via dispatchEvent: direct invocation behaves identically in
   * every host (some compile handler attributes without wiring them into
   * event dispatch), and nothing native can double-run a handler that never
   * exists outside this window.
   */
  private synthesize(el: Element, type: "load" | "error"): void {
    const attr = "on" + type;
    const stash = "data-harness-" + attr;
    const source = el.getAttribute(stash);
    if (source === null) {
      return;
    }
    el.removeAttribute(stash);
    el.setAttribute(attr, source);
    const reflected = (el as unknown as Record<string, unknown>)[attr];
    try {
      const event = new this.win.Event(type);
      if (typeof reflected === "function") {
        reflected.call(el, event);
      } else {
        new this.win.Function("event", source).call(el, event);
      }
    } catch (err) {
      this.record({ kind: "error", message: String(err) });
    }
    el.removeAttribute(attr);
  }

  private injectMarkup(markup: string, container: Element): void {
    const doc = this.win.document;

    // inert parse first: template content runs no scripts and loads nothing
    const template = doc.createElement("template");
    template.innerHTML = markup;
    const fragment = template.content;

    const pending: Array<[Element, "load" | "error"]> = [];
    for (const el of Array.from(fragment.querySelectorAll("*"))) {
      const lifecycle = this.neutralize(el);
      if (lifecycle !== null) {
        pending.push([el, lifecycle]);
      }
    }

    // parser-activating insertion: browsers never execute script elements
    // created by fragment parsing, so each one is rebuilt live. This is the
    // single most behavior-relevant choice in the page: <script> bodies and
    // event-handler attributes in the payload really execute.
    for (const stale of Array.from(fragment.querySelectorAll("script"))) {
      const live = doc.createElement("script");
      for (const { name, value } of Array.from(stale.attributes)) {
        live.setAttribute(name, value);
      }
      live.textContent = stale.textContent;
      stale.replaceWith(live);
      const idx = pending.findIndex(([el]) => el === stale);
      if (idx >= 0) {
        pending[idx] = [live, pending[idx]![1]];
      }
    }

    container.appendChild(fragment);

    // template-parsed handler attributes stay inert in hosts that compile
    // them only on setAttribute inside a scripting-enabled document;
    // re-setting each one after insertion makes them live everywhere
    for (const el of Array.from(container.querySelectorAll("*"))) {
      for (const { name, value } of Array.from(el.attributes)) {
        if (name.toLowerCase().startsWith("on")) {
          el.removeAttribute(name);
          el.setAttribute(name, value);
        }
      }
    }

    for (const [el, type] of pending) {
      this.synthesize(el, type);
    }

    if (this.clickInjected) {
      const targets = Array.from(container.querySelectorAll("*")).slice(
        0,
        MAX_CLICK_TARGETS,
      );
      for (const el of targets) {
        el.dispatchEvent(
          new this.win.MouseEvent("click", { bubbles: false, cancelable: true }),
        );
      }
    }
  }

  private injectionContainer(): Element {
    const doc = this.win.document;
    const existing = doc.getElementById("harness-sink");
    if (existing) {
      return existing;
    }
    const div = doc.createElement("div");
    div.id = "harness-sink";
    doc.body.appendChild(div);
    return div;
  }

  /** Insert the payload into the page under the given context. */
  inject(payload: string, context: InjectionContext): void {
    const container = this.injectionContainer();
    try {
      if (context === "html_body") {
        this.injectMarkup(payload, container);
      } else if (context === "script") {
        const script = this.win.document.createElement("script");
        script.textContent = payload;
        container.appendChild(script);
      } else if (context === "attribute") {
        // naive server-side interpolation into an attribute slot: a payload
        // breaking out of the quoted value escapes into markup context
        this.injectMarkup(
          '<div data-harness-slot="' + payload + '"></div>',
          container,
        );
      } else {
        throw new Error(`unknown injection context: ${context}`);
      }
    } catch (err) {
      this.record({ kind: "error", message: String(err) });
    }
  }

  /** Seal the trace and serialize it; stable across repeated calls. */
  getTrace(): string {
    if (this.sealedJson !== null) {
      return this.sealedJson;
    }
    this.sealed = true;
    const doc: TraceDocument = {
      status: this.status,
      duration_ms: Math.max(0, Math.round(Date.now() - this.startTime)),
      events: this.events,
    };
    this.sealedJson = JSON.stringify(doc);
    return this.sealedJson;
  }

  /**
   * One full evaluation: inject, wait for quiescence (settleMs with no new
   * events, capped by timeoutMs), seal, serialize. A page hosts exactly one
   * evaluation; later calls return the sealed trace unchanged.
   */
  async run(
    payload: string,
    context: InjectionContext,
    timeoutMs: number,
    settleMs: number,
  ): Promise<string> {
    if (this.ran) {
      return this.getTrace();
    }
    this.ran = true;
    this.install();
    this.startTime = Date.now();
    this.lastActivity = this.startTime;
    this.record({
      kind: "console",
      level: "debug",
      message: `${HARNESS_NOISE_PREFIX} inject ${context}`,
    });
    this.inject(payload, context);
    this.lastActivity = Math.max(this.lastActivity, Date.now());

    for (;;) {
      const now = Date.now();
      if (now - this.startTime >= timeoutMs) {
        this.status = "timeout";
        break;
      }
      if (now - this.lastActivity >= settleMs) {
        break;
      }
      await sleep(5);
    }
    return this.getTrace();
  }
}

/**
 * Wire a window for the automation driver: installs hooks immediately and
 * exposes window.__harnessRun(payload, context, timeoutMs, settleMs).
 */
export function installHarness(win: Window, options: ShimOptions = {}): HarnessShim {
  const shim = new HarnessShim(win, options);
  shim.install();
  (win as HookedWindow).__harnessRun = (payload, context, timeoutMs, settleMs) =>
    shim.run(payload, context as InjectionContext, timeoutMs, settleMs);
  return shim;
}
