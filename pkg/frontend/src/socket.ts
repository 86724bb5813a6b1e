// Reconnecting websocket wrapper. The socket constructor is injectable so
// tests can drive the protocol with a fake or a node-side client.

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LiveSocketHooks {
  onOpen(): void;
  onRaw(data: string): void;
  onReconnecting(): void;
  onClosed(): void;
}

export class LiveSocket {
  private socket: SocketLike | null = null;
  private closedByUser = false;
  private retryMs = 500;

  constructor(private url: string, private hooks: LiveSocketHooks,
              private factory: SocketFactory,
              private maxRetryMs = 5000) {}

  connect(): void {
    this.socket = this.factory(this.url);
    this.socket.onopen = () => {
      this.retryMs = 500;
      this.hooks.onOpen();
    };
    this.socket.onmessage = (ev) => this.hooks.onRaw(String(ev.data));
    this.socket.onclose = () => this.handleDrop();
    this.socket.onerror = () => { /* close follows */ };
  }

  private handleDrop(): void {
    if (this.closedByUser) {
      this.hooks.onClosed();
      return;
    }
    this.hooks.onReconnecting();
    setTimeout(() => this.connect(), this.retryMs);
    this.retryMs = Math.min(this.retryMs * 2, this.maxRetryMs);
  }

  send(data: string): void {
    this.socket?.send(data);
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
  }
}
